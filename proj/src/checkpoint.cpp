#include "mohaq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace mohaq {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_network(const SruNetwork& net) {
  validate_network(net);
  Writer w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  const auto& d = net.dims;
  for (std::size_t v : {d.input_size, d.hidden_size, d.num_directions, d.output_classes, d.sru_layers}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& s = net.layers[l];
    w.u32(static_cast<std::uint32_t>(s.kind));
    w.u32(static_cast<std::uint32_t>(s.in_dim));
    w.u32(static_cast<std::uint32_t>(s.out_dim));
    w.u32(static_cast<std::uint32_t>(s.directions));
    w.u32(static_cast<std::uint32_t>(net.params[l].mxv.size()));
    w.u32(static_cast<std::uint32_t>(net.params[l].aux.size()));
    w.u64(s.total_param_count());
  }
  for (const auto& p : net.params) {
    for (const auto& m : p.mxv)
      for (double v : m.data) w.f32(v);
    for (const auto& a : p.aux)
      for (double v : a) w.f32(v);
  }
  return w.take();
}

SruNetwork deserialize_network(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a MOHAQNET checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  NetworkDims dims;
  dims.input_size = r.u32();
  dims.hidden_size = r.u32();
  dims.num_directions = r.u32();
  dims.output_classes = r.u32();
  dims.sru_layers = r.u32();
  SruNetwork net = make_zero_network(dims);
  const std::uint32_t layer_count = r.u32();
  if (layer_count != net.layers.size()) throw std::runtime_error("checkpoint layer table mismatch");
  for (std::size_t l = 0; l < layer_count; ++l) {
    const auto& s = net.layers[l];
    const bool ok = r.u32() == static_cast<std::uint32_t>(s.kind) && r.u32() == s.in_dim &&
                    r.u32() == s.out_dim && r.u32() == s.directions &&
                    r.u32() == net.params[l].mxv.size() && r.u32() == net.params[l].aux.size() &&
                    r.u64() == s.total_param_count();
    if (!ok) throw std::runtime_error("checkpoint layer " + std::to_string(l) + " entry mismatch");
  }
  for (auto& p : net.params) {
    for (auto& m : p.mxv)
      for (double& v : m.data) v = r.f32();
    for (auto& a : p.aux)
      for (double& v : a) v = r.f32();
  }
  if (!r.done()) throw std::runtime_error("trailing bytes in checkpoint");
  return net;
}

void save_checkpoint(const SruNetwork& net, const std::filesystem::path& path) {
  const auto bytes = serialize_network(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

SruNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_network(bytes);
}

std::string network_digest(const SruNetwork& net) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint8_t b : serialize_network(net)) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace mohaq
