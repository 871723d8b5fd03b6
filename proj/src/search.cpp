#include "mohaq/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <set>
#include <stdexcept>

namespace mohaq {

SearchMode search_mode_from_string(const std::string& s) {
  if (s == "inference") return SearchMode::InferenceOnly;
  if (s == "beacon3") return SearchMode::BeaconFixed3;
  if (s == "beacon-dyn") return SearchMode::BeaconDynamic;
  throw std::invalid_argument("unknown search mode '" + s + "' (inference, beacon3, beacon-dyn)");
}

std::string to_string(SearchMode mode) {
  switch (mode) {
    case SearchMode::InferenceOnly: return "inference";
    case SearchMode::BeaconFixed3: return "beacon3";
    case SearchMode::BeaconDynamic: return "beacon-dyn";
  }
  return "?";
}

Objective objective_from_string(const std::string& s) {
  if (s == "error") return Objective::Error;
  if (s == "speedup") return Objective::Speedup;
  if (s == "energy") return Objective::Energy;
  if (s == "memory") return Objective::Memory;
  throw std::invalid_argument("unknown objective '" + s + "' (error, speedup, energy, memory)");
}

std::string to_string(Objective o) {
  switch (o) {
    case Objective::Error: return "error";
    case Objective::Speedup: return "speedup";
    case Objective::Energy: return "energy";
    case Objective::Memory: return "memory";
  }
  return "?";
}

std::size_t genes_per_layer(const HwProfile& profile) { return profile.tie_wa ? 1 : 2; }

std::vector<int> gene_alphabet(const HwProfile& profile, std::size_t gene) {
  std::vector<int> codes;
  for (Precision p : kAllPrecisions) {
    int b = bit_width(p);
    bool w = std::find(profile.weight_bits.begin(), profile.weight_bits.end(), b) != profile.weight_bits.end();
    bool a = std::find(profile.activation_bits.begin(), profile.activation_bits.end(), b) !=
             profile.activation_bits.end();
    bool ok = profile.tie_wa ? (w && a) : (gene % 2 == 0 ? w : a);
    if (ok) codes.push_back(encoded(p));
  }
  return codes;
}

QuantAssignment decode(const Genome& genome, const HwProfile& profile) {
  const std::size_t gpl = genes_per_layer(profile);
  if (genome.empty() || genome.size() % gpl != 0) {
    throw std::invalid_argument("genome length " + std::to_string(genome.size()) + " is not a multiple of " +
                                std::to_string(gpl));
  }
  QuantAssignment a;
  for (std::size_t i = 0; i < genome.size(); i += gpl) {
    Precision w = precision_from_code(genome[i]);
    Precision act = gpl == 1 ? w : precision_from_code(genome[i + 1]);
    a.layers.push_back({w, act});
  }
  return a;
}

Genome encode(const QuantAssignment& assignment, const HwProfile& profile) {
  Genome g;
  for (std::size_t l = 0; l < assignment.layers.size(); ++l) {
    const auto& lp = assignment.layers[l];
    if (profile.tie_wa) {
      if (lp.weight != lp.activation) {
        throw std::invalid_argument("layer " + std::to_string(l) + " has different weight and activation "
                                    "precision, which profile " + profile.name + " cannot encode");
      }
      g.push_back(encoded(lp.weight));
    } else {
      g.push_back(encoded(lp.weight));
      g.push_back(encoded(lp.activation));
    }
  }
  return g;
}

int beacon_distance(const Genome& a, const Genome& b, std::size_t genes_per_layer) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("genome lengths differ (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  if (genes_per_layer == 0) throw std::invalid_argument("genes_per_layer must be positive");
  int d = 0;
  for (std::size_t i = 0; i < a.size(); i += genes_per_layer) d += std::abs(a[i] - b[i]);
  return d;
}

const Beacon& select_beacon(const QuantAssignment& assignment, const BeaconSet& beacons) {
  if (!beacons.general) throw std::invalid_argument("beacon set has no general beacon");
  if (!assignment.layers.empty()) {
    const auto& first = assignment.layers.front();
    if (first.weight == Precision::Int2 && beacons.first_layer_2bit) return *beacons.first_layer_2bit;
    if (first.weight == Precision::Fix16 && first.activation == Precision::Fix16 && beacons.first_layer_fix16) {
      return *beacons.first_layer_fix16;
    }
  }
  return *beacons.general;
}

FixedBeaconGenomes fixed_beacon_assignments(std::size_t layer_count, const HwProfile& profile) {
  if (layer_count == 0) throw std::invalid_argument("layer_count must be positive");
  int lowest = *std::min_element(profile.weight_bits.begin(), profile.weight_bits.end());
  QuantAssignment general;
  general.layers.assign(layer_count, {precision_from_bits(lowest), Precision::Int8});
  general.layers[0] = {Precision::Int4, Precision::Int8};
  FixedBeaconGenomes out{general, general, general};
  out.first_layer_2bit.layers[0] = {Precision::Int2, Precision::Int8};
  out.first_layer_fix16.layers[0] = {Precision::Fix16, Precision::Fix16};
  return out;
}

std::optional<std::size_t> dynamic_beacon_policy(const Genome& solution, std::vector<Beacon>& beacons,
                                                 std::size_t threshold, std::size_t budget,
                                                 std::size_t genes_per_layer, const RetrainFn& retrain) {
  std::optional<std::size_t> nearest;
  std::size_t best = 0;
  for (std::size_t i = 0; i < beacons.size(); ++i) {
    auto d = static_cast<std::size_t>(beacon_distance(solution, beacons[i].source_genome, genes_per_layer));
    if (!nearest || d < best) {
      nearest = i;
      best = d;
    }
  }
  bool want_new = !nearest || best > threshold;
  if (!want_new || beacons.size() >= budget) return nearest;
  try {
    beacons.push_back(retrain(solution));
    return beacons.size() - 1;
  } catch (const std::exception& e) {
    std::cerr << "warning: retraining beacon for " << genome_to_string(solution) << " failed: " << e.what()
              << "; using the nearest existing beacon\n";
    return nearest;
  }
}

void validate_settings(const SearchSettings& s, const HwProfile& profile) {
  if (s.objectives.size() < 2) throw std::invalid_argument("objectives: at least two are required");
  std::set<Objective> seen;
  for (Objective o : s.objectives) {
    if (!seen.insert(o).second) throw std::invalid_argument("objectives: '" + to_string(o) + "' repeated");
    if (o == Objective::Energy && !profile.has_energy()) {
      throw std::invalid_argument("objectives: profile " + profile.name + " has no energy table");
    }
  }
  if (!seen.contains(Objective::Error)) throw std::invalid_argument("objectives: 'error' is required");
  if (!(s.error_threshold > 0.0 && s.error_threshold <= 1.0)) {
    throw std::invalid_argument("constraints.error_threshold must lie in (0, 1]");
  }
  if (s.min_compression_ratio && !(*s.min_compression_ratio > 0.0)) {
    throw std::invalid_argument("constraints.min_compression_ratio must be positive");
  }
  if (s.beacon_error_margin < 0.0) throw std::invalid_argument("beacon.error_margin must be non-negative");
}

ParameterSource make_source(std::string name, SruNetwork net, std::span<const Matrix> calibration_inputs,
                            std::optional<Beacon> beacon) {
  ParameterSource s;
  s.name = std::move(name);
  s.net = std::move(net);
  s.bank = std::make_shared<const WeightBank>(s.net);
  s.calib = calibrate(s.net, calibration_inputs);
  s.beacon = std::move(beacon);
  return s;
}

double quantized_error(const ParameterSource& source, const QuantAssignment& assignment,
                       std::span<const LabeledSequence> data) {
  QuantizedModel model(source.net, source.bank, assignment, source.calib);
  ErrorCount total;
  for (const auto& seq : data) {
    auto e = count_errors(model.forward(seq.features), seq.labels);
    total.wrong += e.wrong;
    total.total += e.total;
  }
  return total.rate();
}

namespace {

Genome beacon_genome(const QuantAssignment& a, const HwProfile& profile) {
  try {
    return encode(a, profile);
  } catch (const std::invalid_argument&) {
    Genome g;
    for (const auto& lp : a.layers) {
      g.push_back(encoded(lp.weight));
      g.push_back(encoded(lp.activation));
    }
    return g;
  }
}

}  // namespace

SearchProblem::SearchProblem(const SruNetwork& baseline, HwProfile profile, SearchSettings settings,
                             std::span<const LabeledSequence> eval_split,
                             std::span<const LabeledSequence> train_split,
                             std::span<const Matrix> calibration_inputs)
    : profile_(std::move(profile)),
      settings_(std::move(settings)),
      eval_(eval_split),
      train_(train_split),
      calibration_inputs_(calibration_inputs.begin(), calibration_inputs.end()) {
  validate_profile(profile_);
  validate_settings(settings_, profile_);
  validate_network(baseline);
  if (eval_.empty()) throw std::invalid_argument("evaluation split is empty");
  if (calibration_inputs_.empty()) throw std::invalid_argument("calibration set is empty");
  arch_ = baseline.layers;
  seq_len_ = eval_.front().features.rows;
  if (settings_.min_compression_ratio) {
    double budget = static_cast<double>(float_baseline_bits(arch_)) / *settings_.min_compression_ratio;
    max_bits_ = static_cast<std::uint64_t>(std::floor(budget));
  }
  if (profile_.sram_bytes) {
    std::uint64_t sram_bits = *profile_.sram_bytes * 8;
    max_bits_ = max_bits_ ? std::min(*max_bits_, sram_bits) : sram_bits;
  }
  sources_.push_back(std::make_unique<ParameterSource>(make_source("baseline", baseline, calibration_inputs_)));
}

std::size_t SearchProblem::genome_length() const { return arch_.size() * genes_per_layer(profile_); }

std::vector<int> SearchProblem::alphabet(std::size_t gene) const { return gene_alphabet(profile_, gene); }

void SearchProblem::build_fixed_beacons() {
  auto presets = fixed_beacon_assignments(arch_.size(), profile_);
  struct Item {
    std::string name;
    QuantAssignment assignment;
    BeaconKind kind;
  };
  std::vector<Item> items = {{"general", presets.general, BeaconKind::General}};
  if (std::find(profile_.weight_bits.begin(), profile_.weight_bits.end(), 2) != profile_.weight_bits.end()) {
    items.push_back({"first_layer_2bit", presets.first_layer_2bit, BeaconKind::FirstLayer2Bit});
  }
  if (profile_.supports(Precision::Fix16)) {
    items.push_back({"first_layer_fix16", presets.first_layer_fix16, BeaconKind::FirstLayerFix16});
  }
  for (auto& item : items) {
    if (source(item.name)) continue;
    Beacon b = retrain_binary_connect(baseline().net, item.assignment, beacon_genome(item.assignment, profile_),
                                      item.kind, train_, settings_.retrain);
    SruNetwork params = b.parameters;
    add_beacon_source(make_source(item.name, std::move(params), calibration_inputs_, std::move(b)));
  }
}

void SearchProblem::add_beacon_source(ParameterSource source) {
  std::lock_guard lock(beacon_mutex_);
  for (const auto& s : sources_) {
    if (s->name == source.name) throw std::invalid_argument("duplicate parameter source '" + source.name + "'");
  }
  if (!(source.net.layers == arch_)) {
    throw std::invalid_argument("beacon '" + source.name + "' does not match the baseline architecture");
  }
  if (source.beacon && source.beacon->kind == BeaconKind::Dynamic) dynamic_beacons_.push_back(*source.beacon);
  sources_.push_back(std::make_unique<ParameterSource>(std::move(source)));
}

const ParameterSource* SearchProblem::source(const std::string& name) const {
  std::lock_guard lock(beacon_mutex_);
  for (const auto& s : sources_) {
    if (s->name == name) return s.get();
  }
  return nullptr;
}

std::vector<const ParameterSource*> SearchProblem::beacon_sources() const {
  std::lock_guard lock(beacon_mutex_);
  std::vector<const ParameterSource*> out;
  for (std::size_t i = 1; i < sources_.size(); ++i) out.push_back(sources_[i].get());
  return out;
}

HardwareMetrics SearchProblem::hardware(const QuantAssignment& assignment) const {
  for (std::size_t l = 0; l < assignment.layers.size(); ++l) {
    for (Precision p : {assignment.layers[l].weight, assignment.layers[l].activation}) {
      if (!profile_.supports(p)) {
        throw UnsupportedPrecision("layer " + std::to_string(l) + ": " + to_string(p) +
                                   " is not supported by profile " + profile_.name);
      }
    }
  }
  HardwareMetrics hw;
  hw.model_bits = memory_size_bits(arch_, assignment);
  hw.compression_ratio =
      static_cast<double>(float_baseline_bits(arch_)) / static_cast<double>(hw.model_bits);
  hw.speedup = speedup(arch_, assignment, profile_, seq_len_);
  if (profile_.has_energy()) hw.energy_j = energy(arch_, assignment, profile_, seq_len_);
  if (max_bits_ && hw.model_bits > *max_bits_) {
    hw.memory_violation =
        static_cast<double>(hw.model_bits - *max_bits_) / static_cast<double>(*max_bits_);
  }
  return hw;
}

Evaluation SearchProblem::assemble(const HardwareMetrics& hw, double error, std::string tag) const {
  Evaluation e;
  for (Objective o : settings_.objectives) {
    switch (o) {
      case Objective::Error: e.objectives.push_back(error); break;
      case Objective::Speedup: e.objectives.push_back(-hw.speedup); break;
      case Objective::Energy: e.objectives.push_back(hw.energy_j.value()); break;
      case Objective::Memory: e.objectives.push_back(static_cast<double>(hw.model_bits)); break;
    }
  }
  double err_excess = std::max(0.0, error - settings_.error_threshold) / settings_.error_threshold;
  e.violation = hw.memory_violation + err_excess;
  e.tag = std::move(tag);
  return e;
}

SearchProblem::Partial SearchProblem::evaluate_baseline_part(const Genome& genome) const {
  Partial p;
  if (genome.size() != genome_length()) {
    throw std::invalid_argument("genome length " + std::to_string(genome.size()) + ", expected " +
                                std::to_string(genome_length()));
  }
  p.assignment = decode(genome, profile_);
  p.hw = hardware(p.assignment);
  p.baseline_error = quantized_error(baseline(), p.assignment, eval_);
  return p;
}

Evaluation SearchProblem::finish(const Partial& p, double beacon_error) const {
  if (p.beacon && beacon_error < p.baseline_error) return assemble(p.hw, beacon_error, p.beacon->name);
  return assemble(p.hw, p.baseline_error, "");
}

const ParameterSource* SearchProblem::fixed_beacon_for(const QuantAssignment& assignment) const {
  const ParameterSource* general = source("general");
  if (!general) throw std::logic_error("beacon mode requires the fixed beacons to be built");
  const auto& first = assignment.layers.front();
  if (first.weight == Precision::Int2) {
    if (const auto* s = source("first_layer_2bit")) return s;
  }
  if (first.weight == Precision::Fix16 && first.activation == Precision::Fix16) {
    if (const auto* s = source("first_layer_fix16")) return s;
  }
  return general;
}

const ParameterSource* SearchProblem::dynamic_beacon_for(const Genome& genome, const Partial& p) const {
  if (!hardware_feasible(p.hw)) return nullptr;
  if (p.baseline_error > settings_.error_threshold + settings_.beacon_error_margin) return nullptr;
  std::lock_guard lock(beacon_mutex_);
  std::size_t before = dynamic_beacons_.size();
  auto retrain = [&](const Genome& g) {
    return retrain_binary_connect(baseline().net, decode(g, profile_), g, BeaconKind::Dynamic, train_,
                                  settings_.retrain);
  };
  auto idx = dynamic_beacon_policy(genome, dynamic_beacons_, settings_.dynamic_threshold, settings_.beacon_budget,
                                   genes_per_layer(profile_), retrain);
  if (!idx) return nullptr;
  if (dynamic_beacons_.size() > before) {
    const Beacon& b = dynamic_beacons_.back();
    sources_.push_back(std::make_unique<ParameterSource>(
        make_source("dynamic-" + std::to_string(before), b.parameters, calibration_inputs_, b)));
  }
  // Dynamic sources follow the fixed ones in creation order.
  std::size_t seen = 0;
  for (const auto& s : sources_) {
    if (s->beacon && s->beacon->kind == BeaconKind::Dynamic) {
      if (seen == *idx) return s.get();
      ++seen;
    }
  }
  throw std::logic_error("dynamic beacon index out of range");
}

Evaluation SearchProblem::evaluate_inference_only(const Genome& genome) const {
  Partial p = evaluate_baseline_part(genome);
  return finish(p, 0.0);
}

Evaluation SearchProblem::evaluate_beacon_based(const Genome& genome) const {
  Partial p = evaluate_baseline_part(genome);
  if (settings_.mode == SearchMode::BeaconDynamic) {
    p.beacon = dynamic_beacon_for(genome, p);
  } else if (hardware_feasible(p.hw)) {
    p.beacon = fixed_beacon_for(p.assignment);
  }
  double be = p.beacon ? quantized_error(*p.beacon, p.assignment, eval_) : p.baseline_error;
  return finish(p, be);
}

Evaluation SearchProblem::evaluate(const Genome& genome) const {
  Genome g = genome;
  return evaluate_batch(std::span<const Genome>(&g, 1), 1).front();
}

std::vector<Evaluation> SearchProblem::evaluate_batch(std::span<const Genome> genomes, std::size_t jobs) const {
  auto wrap = [&](std::size_t i, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error("evaluating genome " + genome_to_string(genomes[i]) + ": " + e.what());
    }
  };
  std::vector<Evaluation> out(genomes.size());
  if (settings_.mode == SearchMode::InferenceOnly) {
    parallel_for(genomes.size(), jobs, [&](std::size_t i) {
      wrap(i, [&] { out[i] = evaluate_inference_only(genomes[i]); });
    });
    return out;
  }
  if (settings_.mode == SearchMode::BeaconFixed3) {
    parallel_for(genomes.size(), jobs, [&](std::size_t i) {
      wrap(i, [&] { out[i] = evaluate_beacon_based(genomes[i]); });
    });
    return out;
  }
  // Dynamic mode: beacon creation happens between two parallel phases, in index order,
  // so the beacon list does not depend on thread timing.
  std::vector<Partial> parts(genomes.size());
  parallel_for(genomes.size(), jobs, [&](std::size_t i) {
    wrap(i, [&] { parts[i] = evaluate_baseline_part(genomes[i]); });
  });
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    wrap(i, [&] { parts[i].beacon = dynamic_beacon_for(genomes[i], parts[i]); });
  }
  parallel_for(genomes.size(), jobs, [&](std::size_t i) {
    wrap(i, [&] {
      const Partial& p = parts[i];
      double be = p.beacon ? quantized_error(*p.beacon, p.assignment, eval_) : p.baseline_error;
      out[i] = finish(p, be);
    });
  });
  return out;
}

ParetoRecord evaluate_record(const SearchProblem& problem, const Genome& genome, const std::string& beacon_used,
                             std::span<const LabeledSequence> test_split) {
  ParetoRecord r;
  r.genome = genome;
  r.assignment = decode(genome, problem.profile());
  auto hw = problem.hardware(r.assignment);
  double err = quantized_error(problem.baseline(), r.assignment, problem.eval_split());
  const ParameterSource* winner = &problem.baseline();
  if (!beacon_used.empty()) {
    winner = problem.source(beacon_used);
    if (!winner) throw std::invalid_argument("unknown beacon '" + beacon_used + "'");
    err = std::min(err, quantized_error(*winner, r.assignment, problem.eval_split()));
  }
  Evaluation e = problem.assemble(hw, err, beacon_used);
  r.objectives = e.objectives;
  r.validation_error = err;
  r.test_error = quantized_error(*winner, r.assignment, test_split);
  r.compression_ratio = hw.compression_ratio;
  r.speedup = hw.speedup;
  r.energy_j = hw.energy_j;
  r.beacon_used = beacon_used;
  return r;
}

SearchResult run_search(const SearchProblem& problem, const GaConfig& cfg,
                        std::span<const LabeledSequence> test_split) {
  if (problem.settings().mode == SearchMode::BeaconFixed3 && !problem.source("general")) {
    throw std::logic_error("beacon3 mode: build_fixed_beacons must run before the search");
  }
  auto evo = evolve(problem, cfg);
  SearchResult result;
  result.evaluations = evo.log.size();
  result.log = std::move(evo.log);
  const auto& objs = problem.settings().objectives;
  std::size_t err_idx = static_cast<std::size_t>(std::find(objs.begin(), objs.end(), Objective::Error) - objs.begin());
  std::vector<ParetoRecord> records(evo.pareto.size());
  parallel_for(records.size(), cfg.jobs, [&](std::size_t i) {
    const auto& s = evo.pareto[i];
    ParetoRecord r;
    r.genome = s.genome;
    r.assignment = decode(s.genome, problem.profile());
    auto hw = problem.hardware(r.assignment);
    r.objectives = s.eval.objectives;
    r.validation_error = s.eval.objectives[err_idx];
    r.compression_ratio = hw.compression_ratio;
    r.speedup = hw.speedup;
    r.energy_j = hw.energy_j;
    r.beacon_used = s.eval.tag;
    const ParameterSource* winner = r.beacon_used.empty() ? &problem.baseline() : problem.source(r.beacon_used);
    r.test_error = quantized_error(*winner, r.assignment, test_split);
    records[i] = std::move(r);
  });
  std::stable_sort(records.begin(), records.end(), [](const ParetoRecord& a, const ParetoRecord& b) {
    if (a.validation_error != b.validation_error) return a.validation_error < b.validation_error;
    return a.genome < b.genome;
  });
  result.records = std::move(records);
  return result;
}

}  // namespace mohaq
