#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mohaq/hw_cost.hpp"
#include "mohaq/nsga2.hpp"
#include "mohaq/search.hpp"
#include "mohaq/synthetic_task.hpp"
#include "mohaq/trainer.hpp"

namespace mohaq {

// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string preset;
  TaskConfig task;
  NetworkDims dims;
  TrainConfig train{15, 0.5, 16, 1, 0.2};
  std::string profile = "bitfusion";  // built-in name or INI file path
  std::vector<Objective> objectives = {Objective::Error, Objective::Speedup};
  std::optional<double> min_compression_ratio;
  // Exactly one is set: an absolute bound, or a margin over the baseline's error.
  std::optional<double> error_threshold;
  std::optional<double> error_margin_over_baseline;
  GaConfig ga;
  SearchMode mode = SearchMode::InferenceOnly;
  std::uint64_t eval_split_seed = 3;
  std::size_t calibration_sequences = 70;  // leading validation sequences
  std::size_t dynamic_threshold = 4;
  std::size_t beacon_budget = 10;
  double beacon_error_margin = 0.08;
  TrainConfig retrain{5, 0.5, 16, 11, std::nullopt};
};

std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

// Starts from "preset" when given (default: bitfusion) and applies the remaining fields.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

HwProfile resolve_profile(const std::string& name_or_path);

// Everything derived deterministically from the configuration.
struct ExperimentData {
  Dataset data;
  std::vector<LabeledSequence> eval_split;
  std::vector<Matrix> calibration_inputs;
};
ExperimentData prepare_data(const ExperimentConfig& cfg);

struct TrainSummary {
  std::string digest;
  double validation_error = 0.0;
  std::vector<double> epoch_loss;
};
TrainSummary cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint);

struct SearchSummary {
  SearchResult result;
  double baseline_error = 0.0;  // full precision, evaluation split
  double error_threshold = 0.0;
};

// Builds the search problem (and beacons, when `beacons_dir` holds saved ones they are
// loaded instead of retrained).
std::unique_ptr<SearchProblem> make_search_problem(const ExperimentConfig& cfg, const SruNetwork& baseline,
                                                   const ExperimentData& data, double* baseline_error = nullptr,
                                                   double* threshold = nullptr);

SearchSummary cmd_search(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                         const std::filesystem::path& out_dir, std::size_t jobs);

void save_beacons(const SearchProblem& problem, const std::filesystem::path& dir);
void load_beacons(SearchProblem& problem, const std::filesystem::path& dir,
                  std::span<const Matrix> calibration_inputs);

struct VerifyReport {
  std::size_t rows = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

// Re-evaluates every row, checks bit-exact reproduction, constraints and mutual
// non-domination. Beacons are read from `beacons/` beside the CSV.
VerifyReport cmd_verify(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                        const std::filesystem::path& pareto_csv, std::size_t jobs);

}  // namespace mohaq
