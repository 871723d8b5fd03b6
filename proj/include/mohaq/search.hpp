#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mohaq/genome.hpp"
#include "mohaq/hw_cost.hpp"
#include "mohaq/nsga2.hpp"
#include "mohaq/sru_net.hpp"
#include "mohaq/synthetic_task.hpp"
#include "mohaq/trainer.hpp"

namespace mohaq {

enum class SearchMode { InferenceOnly, BeaconFixed3, BeaconDynamic };
SearchMode search_mode_from_string(const std::string& s);  // inference | beacon3 | beacon-dyn
std::string to_string(SearchMode mode);

enum class Objective { Error, Speedup, Energy, Memory };
Objective objective_from_string(const std::string& s);  // error | speedup | energy | memory
std::string to_string(Objective o);

// Genes per layer: 1 when the profile ties weight and activation precision, else 2 (w, a).
std::size_t genes_per_layer(const HwProfile& profile);
std::vector<int> gene_alphabet(const HwProfile& profile, std::size_t gene);
QuantAssignment decode(const Genome& genome, const HwProfile& profile);
Genome encode(const QuantAssignment& assignment, const HwProfile& profile);

// Sum of |a_k - b_k| over weight genes.
int beacon_distance(const Genome& a, const Genome& b, std::size_t genes_per_layer = 2);

struct BeaconSet {
  std::optional<Beacon> general;
  std::optional<Beacon> first_layer_2bit;
  std::optional<Beacon> first_layer_fix16;
  std::vector<Beacon> dynamic;
};

// Chooses among the three fixed beacons by the first layer's precision. Missing special
// beacons fall back to the general one.
const Beacon& select_beacon(const QuantAssignment& assignment, const BeaconSet& beacons);

struct FixedBeaconGenomes {
  QuantAssignment general;
  QuantAssignment first_layer_2bit;
  QuantAssignment first_layer_fix16;
};
// First layer 4W/8A, remaining layers at the lowest weight precision the profile offers
// with 8-bit activations. The specials replace the first layer with 2W/8A and 16W/16A.
FixedBeaconGenomes fixed_beacon_assignments(std::size_t layer_count, const HwProfile& profile);

// Nearest beacon unless it lies farther than `threshold`, in which case `retrain` builds a
// new one that is appended. Returns the index of the beacon to use, or nullopt when none
// exists and retraining failed.
using RetrainFn = std::function<Beacon(const Genome&)>;
std::optional<std::size_t> dynamic_beacon_policy(const Genome& solution, std::vector<Beacon>& beacons,
                                                 std::size_t threshold, std::size_t budget,
                                                 std::size_t genes_per_layer, const RetrainFn& retrain);

inline constexpr std::size_t kNoRetrainThreshold = std::numeric_limits<std::size_t>::max();

struct SearchSettings {
  std::vector<Objective> objectives = {Objective::Error, Objective::Speedup};
  std::optional<double> min_compression_ratio;  // memory constraint
  double error_threshold = 0.24;
  SearchMode mode = SearchMode::InferenceOnly;
  std::size_t dynamic_threshold = 4;
  std::size_t beacon_budget = 10;
  double beacon_error_margin = 0.08;  // dynamic mode: beacon-feasible up to threshold + margin
  TrainConfig retrain{5, 0.5, 16, 11, std::nullopt};
};

void validate_settings(const SearchSettings& s, const HwProfile& profile);

// A parameter set the search can evaluate with: the baseline or one beacon.
struct ParameterSource {
  std::string name;
  SruNetwork net;
  std::shared_ptr<const WeightBank> bank;
  CalibrationTable calib;
  std::optional<Beacon> beacon;
};

ParameterSource make_source(std::string name, SruNetwork net, std::span<const Matrix> calibration_inputs,
                            std::optional<Beacon> beacon = std::nullopt);

double quantized_error(const ParameterSource& source, const QuantAssignment& assignment,
                       std::span<const LabeledSequence> data);

struct HardwareMetrics {
  std::uint64_t model_bits = 0;
  double compression_ratio = 1.0;
  double speedup = 1.0;
  std::optional<double> energy_j;
  double memory_violation = 0.0;  // normalized excess over the memory budget
};

class SearchProblem final : public Problem {
 public:
  SearchProblem(const SruNetwork& baseline, HwProfile profile, SearchSettings settings,
                std::span<const LabeledSequence> eval_split, std::span<const LabeledSequence> train_split,
                std::span<const Matrix> calibration_inputs);

  std::size_t genome_length() const override;
  std::vector<int> alphabet(std::size_t gene) const override;
  std::size_t objective_count() const override { return settings_.objectives.size(); }
  Evaluation evaluate(const Genome& genome) const override;
  std::vector<Evaluation> evaluate_batch(std::span<const Genome> genomes, std::size_t jobs) const override;

  // Retrains the three fixed beacons (beacon3 mode).
  void build_fixed_beacons();
  // Installs prebuilt beacons (e.g. loaded from disk).
  void add_beacon_source(ParameterSource source);

  const ParameterSource& baseline() const { return *sources_.front(); }
  // Source by name; nullptr when unknown.
  const ParameterSource* source(const std::string& name) const;
  std::vector<const ParameterSource*> beacon_sources() const;

  HardwareMetrics hardware(const QuantAssignment& assignment) const;
  std::optional<std::uint64_t> max_model_bits() const { return max_bits_; }
  const HwProfile& profile() const { return profile_; }
  const SearchSettings& settings() const { return settings_; }
  const SruNetwork& network() const { return baseline().net; }
  std::span<const LabeledSequence> eval_split() const { return eval_; }

  // Objective vector and violation for a known error.
  Evaluation assemble(const HardwareMetrics& hw, double error, std::string tag) const;

  // Inference-only error with the baseline parameters.
  Evaluation evaluate_inference_only(const Genome& genome) const;
  // min(baseline error, error with the selected beacon); tag names the winner ("" = baseline).
  Evaluation evaluate_beacon_based(const Genome& genome) const;

 private:
  struct Partial {
    QuantAssignment assignment;
    HardwareMetrics hw;
    double baseline_error = 0.0;
    const ParameterSource* beacon = nullptr;
  };
  Partial evaluate_baseline_part(const Genome& genome) const;
  Evaluation finish(const Partial& p, double beacon_error) const;
  const ParameterSource* fixed_beacon_for(const QuantAssignment& assignment) const;
  bool hardware_feasible(const HardwareMetrics& hw) const { return hw.memory_violation <= 0.0; }
  const ParameterSource* dynamic_beacon_for(const Genome& genome, const Partial& p) const;

  HwProfile profile_;
  SearchSettings settings_;
  std::span<const LabeledSequence> eval_;
  std::span<const LabeledSequence> train_;
  std::vector<Matrix> calibration_inputs_;
  std::vector<LayerSpec> arch_;
  std::size_t seq_len_ = 0;
  std::optional<std::uint64_t> max_bits_;

  mutable std::mutex beacon_mutex_;
  mutable std::vector<std::unique_ptr<ParameterSource>> sources_;  // [0] = baseline
  mutable std::vector<Beacon> dynamic_beacons_;
};

struct ParetoRecord {
  Genome genome;
  QuantAssignment assignment;
  std::vector<double> objectives;
  double validation_error = 0.0;
  double test_error = 0.0;
  double compression_ratio = 1.0;
  double speedup = 1.0;
  std::optional<double> energy_j;
  std::string beacon_used;  // empty: baseline parameters
};

struct SearchResult {
  std::vector<ParetoRecord> records;  // sorted by validation error, then genome
  std::vector<EvalRecord> log;
  std::size_t evaluations = 0;
};

SearchResult run_search(const SearchProblem& problem, const GaConfig& cfg,
                        std::span<const LabeledSequence> test_split);

// Rebuilds a record from scratch using the named parameter source.
ParetoRecord evaluate_record(const SearchProblem& problem, const Genome& genome,
                             const std::string& beacon_used, std::span<const LabeledSequence> test_split);

}  // namespace mohaq
