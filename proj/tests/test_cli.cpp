// Exit-code contract of the mohaq executable, exercised as a subprocess.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  std::string cmd = std::string(MOHAQ_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "mohaq_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path tiny_config() {
  fs::path p = scratch() / "tiny.json";
  std::ofstream(p) << R"({
  "preset": "bitfusion",
  "task": {"seq_len": 10, "train_count": 60, "validation_count": 40, "test_count": 20},
  "network": {"hidden_size": 8, "sru_layers": 2},
  "train": {"epochs": 3, "max_validation_error": null},
  "constraints": {"min_compression_ratio": 4.0, "error_threshold": 0.95},
  "ga": {"generations": 3, "seed": 5},
  "search": {"calibration_sequences": 10}
})";
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train --config /no/such/config.json") == 1);
  CHECK(run("search --mode turbo --checkpoint x.mohaq") == 1);
  CHECK(run("search --jobs 0 --checkpoint x.mohaq") == 1);
  CHECK(run("search --preset nope --checkpoint x.mohaq") == 1);
  CHECK(run("--help") == 0);
}

TEST_CASE("runtime failures exit with 2") {
  CHECK(run("search --preset bitfusion --checkpoint /no/such/ckpt.mohaq --out " + (scratch() / "x").string()) == 2);
  fs::path garbage = scratch() / "garbage.mohaq";
  std::ofstream(garbage) << "not a checkpoint";
  CHECK(run("search --preset bitfusion --checkpoint " + garbage.string() + " --out " + (scratch() / "y").string()) ==
        2);
}

TEST_CASE("train, search and verify round trip; tampering exits with 3") {
  const fs::path cfg = tiny_config();
  const fs::path ckpt = scratch() / "baseline.mohaq";
  const fs::path out = scratch() / "search";
  REQUIRE(run("train --config " + cfg.string() + " --checkpoint " + ckpt.string()) == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt.string() + ".summary.json"));
  REQUIRE(run("search --config " + cfg.string() + " --checkpoint " + ckpt.string() + " --out " + out.string() +
              " --jobs 2") == 0);
  for (const char* f : {"pareto.csv", "eval_log.jsonl", "config.json", "summary.txt"}) CHECK(fs::exists(out / f));
  const fs::path csv = out / "pareto.csv";
  // The saved config next to the CSV is picked up automatically.
  CHECK(run("verify --pareto " + csv.string() + " --checkpoint " + ckpt.string()) == 0);

  std::stringstream ss;
  ss << std::ifstream(csv).rdbuf();
  std::string text = ss.str();
  // Flip the lowest bit of the last digit of the first error value.
  auto line = text.find('\n') + 1;
  auto field = text.find(',', text.find(',', line) + 1) + 1;
  auto end = text.find(',', field);
  REQUIRE(end != std::string::npos);
  char& digit = text[end - 1];
  REQUIRE(digit >= '0');
  REQUIRE(digit <= '9');
  digit = static_cast<char>(digit ^ 1);
  fs::path tampered = out / "tampered.csv";
  std::ofstream(tampered) << text;
  CHECK(run("verify --pareto " + tampered.string() + " --checkpoint " + ckpt.string()) == 3);
  CHECK(run("verify --pareto " + (out / "missing.csv").string() + " --checkpoint " + ckpt.string()) == 2);
}
