// mohaq: train a baseline, search mixed-precision assignments, verify a Pareto set.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mohaq/experiment.hpp"

namespace fs = std::filesystem;
using namespace mohaq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerify = 3;

struct Options {
  std::string config;
  std::string preset;
  std::string checkpoint;
  std::string out = "out";
  std::string pareto;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string mode;
  std::string profile;
};

ExperimentConfig resolve_config(const Options& o, const std::string& fallback = "") {
  if (!o.config.empty() && !o.preset.empty()) throw ConfigError("--config and --preset are mutually exclusive");
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw ConfigError("config file not found: " + o.config);
    cfg = load_config(o.config);
  } else if (!o.preset.empty()) {
    cfg = preset_config(o.preset);
  } else if (!fallback.empty() && fs::exists(fallback)) {
    cfg = load_config(fallback);
  } else {
    cfg = preset_config("bitfusion");
  }
  if (!o.mode.empty()) {
    try {
      cfg.mode = search_mode_from_string(o.mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--mode: ") + e.what());
    }
  }
  if (!o.profile.empty()) cfg.profile = o.profile;
  validate_config(cfg);
  return cfg;
}

int run_train(const Options& o) {
  ExperimentConfig cfg = resolve_config(o);
  if (o.seed) cfg.train.seed = *o.seed;
  fs::path ckpt = o.checkpoint.empty() ? fs::path(o.out) / "baseline.mohaq" : fs::path(o.checkpoint);
  auto s = cmd_train(cfg, ckpt);
  std::cout << "checkpoint: " << ckpt.string() << "\n"
            << "digest: " << s.digest << "\n"
            << "validation error: " << s.validation_error << "\n";
  return kExitOk;
}

int run_search(const Options& o) {
  ExperimentConfig cfg = resolve_config(o);
  if (o.seed) cfg.ga.seed = *o.seed;
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required for search");
  if (!fs::exists(o.checkpoint)) throw std::runtime_error("checkpoint not found: " + o.checkpoint);
  auto s = cmd_search(cfg, o.checkpoint, o.out, o.jobs);
  std::cout << "evaluations: " << s.result.evaluations << "\n"
            << "front size: " << s.result.records.size() << "\n"
            << "outputs: " << (fs::path(o.out) / "pareto.csv").string() << "\n";
  return kExitOk;
}

int run_verify(const Options& o) {
  if (o.pareto.empty()) throw ConfigError("--pareto is required for verify");
  if (!fs::exists(o.pareto)) throw std::runtime_error("pareto file not found: " + o.pareto);
  fs::path dir = fs::path(o.pareto).parent_path();
  ExperimentConfig cfg = resolve_config(o, (dir / "config.json").string());
  fs::path ckpt = o.checkpoint;
  if (ckpt.empty()) throw ConfigError("--checkpoint is required for verify");
  auto report = cmd_verify(cfg, ckpt, o.pareto, o.jobs);
  for (const auto& f : report.failures) std::cout << "FAIL " << f << "\n";
  if (!report.ok()) {
    std::cout << "verification failed: " << report.failures.size() << " problem(s) in " << report.rows << " row(s)\n";
    return kExitVerify;
  }
  std::cout << "verification passed: " << report.rows << " row(s)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-objective hardware-aware mixed-precision quantization of SRU networks"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment configuration (JSON)");
    sub->add_option("--preset", o.preset, "Built-in preset: wer-mem, silago, bitfusion, bitfusion-deep");
    sub->add_option("--checkpoint", o.checkpoint, "Baseline checkpoint path");
    sub->add_option("--jobs", o.jobs, "Maximum concurrent evaluations")->check(CLI::PositiveNumber);
    sub->add_option("--profile", o.profile, "Hardware profile: silago, bitfusion or an INI file");
  };

  auto* train = app.add_subcommand("train", "Train the full-precision baseline");
  add_common(train);
  train->add_option("--out", o.out, "Output directory (checkpoint default location)");
  train->add_option("--seed", o.seed, "Training seed");

  auto* search = app.add_subcommand("search", "Search mixed-precision assignments");
  add_common(search);
  search->add_option("--out", o.out, "Output directory");
  search->add_option("--seed", o.seed, "Search seed");
  search->add_option("--mode", o.mode, "inference, beacon3 or beacon-dyn");

  auto* verify = app.add_subcommand("verify", "Re-evaluate and check a Pareto CSV");
  add_common(verify);
  verify->add_option("--pareto", o.pareto, "pareto.csv written by search");
  verify->add_option("--mode", o.mode, "inference, beacon3 or beacon-dyn");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return run_train(o);
    if (search->parsed()) return run_search(o);
    return run_verify(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
