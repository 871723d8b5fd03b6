#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "doctest.h"
#include "mohaq/checkpoint.hpp"

using namespace mohaq;

namespace {

SruNetwork sample_network() {
  NetworkDims d;
  d.input_size = 4;
  d.hidden_size = 3;
  d.output_classes = 5;
  d.sru_layers = 2;
  return make_random_network(d, 17);
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  auto net = sample_network();
  auto bytes = serialize_network(net);
  CHECK(std::memcmp(bytes.data(), kCheckpointMagic, 8) == 0);
  auto back = deserialize_network(bytes);
  CHECK(back == net);
  CHECK(serialize_network(back) == bytes);
  CHECK(network_digest(back) == network_digest(net));

  auto path = std::filesystem::temp_directory_path() / "mohaq_ckpt_roundtrip.mohaq";
  save_checkpoint(net, path);
  CHECK(load_checkpoint(path) == net);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint size follows the layout") {
  auto net = sample_network();
  std::size_t expected = 8 + 4 + 5 * 4 + 4;
  for (const auto& l : net.layers) expected += 6 * 4 + 8 + 4 * l.total_param_count();
  CHECK(serialize_network(net).size() == expected);
}

TEST_CASE("malformed checkpoints are rejected") {
  auto bytes = serialize_network(sample_network());
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_WITH_AS(deserialize_network(bytes), "not a MOHAQNET checkpoint", std::runtime_error);
  }
  SUBCASE("unsupported version") {
    bytes[8] = 9;
    CHECK_THROWS_AS(deserialize_network(bytes), std::runtime_error);
  }
  SUBCASE("truncated") {
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_WITH_AS(deserialize_network(bytes), "checkpoint truncated", std::runtime_error);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK_THROWS_WITH_AS(deserialize_network(bytes), "trailing bytes in checkpoint", std::runtime_error);
  }
  SUBCASE("empty") {
    std::vector<std::uint8_t> none;
    CHECK_THROWS_AS(deserialize_network(none), std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.mohaq"), std::runtime_error);
  }
}

TEST_CASE("digest tracks every parameter") {
  auto net = sample_network();
  const auto before = network_digest(net);
  CHECK(before.size() == 16);
  net.params.back().aux.back().back() += 0.25;
  CHECK(network_digest(net) != before);
}
