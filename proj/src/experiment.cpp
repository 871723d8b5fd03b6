#include "mohaq/experiment.hpp"

#include <algorithm>
#include <concepts>
#include <fstream>
#include <set>
#include <sstream>

#include "mohaq/checkpoint.hpp"
#include "mohaq/csv_report.hpp"

namespace mohaq {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> preset_names() { return {"wer-mem", "silago", "bitfusion", "bitfusion-deep"}; }

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "wer-mem") {
    c.profile = "bitfusion";
    c.objectives = {Objective::Error, Objective::Memory};
    c.error_margin_over_baseline = 0.08;
    c.ga.generations = 60;
  } else if (name == "silago") {
    c.profile = "silago";
    c.objectives = {Objective::Error, Objective::Speedup, Objective::Energy};
    c.min_compression_ratio = 3.5;
    c.error_margin_over_baseline = 0.08;
    c.ga.generations = 15;
  } else if (name == "bitfusion") {
    c.profile = "bitfusion";
    c.objectives = {Objective::Error, Objective::Speedup};
    c.min_compression_ratio = 10.6;
    c.error_threshold = 0.24;
    c.ga.generations = 60;
  } else if (name == "bitfusion-deep") {
    c.profile = "bitfusion";
    c.objectives = {Objective::Error, Objective::Speedup};
    c.dims.sru_layers = 6;
    c.min_compression_ratio = 9.9;
    c.error_threshold = 0.24;
    c.ga.generations = 90;
  } else {
    throw ConfigError("preset: unknown preset '" + name + "'");
  }
  return c;
}

namespace {

// Reads one JSON object, remembering which keys were used so leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }
  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <std::unsigned_integral T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(field(key) + ": expected a non-negative integer");
    out = v.get<T>();
  }
  void read(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    out = v.get<double>();
  }
  void read(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    out = v.get<std::string>();
  }
  // Present and null clears; present and numeric sets.
  void read(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (v.is_null()) {
      out.reset();
      return;
    }
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number or null");
    out = v.get<double>();
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.contains(key)) throw ConfigError(field(key) + ": unknown key");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_train(ObjectReader& r, TrainConfig& t, bool allow_bound) {
  r.read("epochs", t.epochs);
  r.read("learning_rate", t.learning_rate);
  r.read("batch_size", t.batch_size);
  r.read("seed", t.seed);
  if (allow_bound) r.read("max_validation_error", t.max_validation_error);
}

json train_json(const TrainConfig& t, bool with_bound) {
  json j = {{"epochs", t.epochs}, {"learning_rate", t.learning_rate}, {"batch_size", t.batch_size}, {"seed", t.seed}};
  if (with_bound) j["max_validation_error"] = t.max_validation_error ? json(*t.max_validation_error) : json(nullptr);
  return j;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void check_train(const TrainConfig& t, const std::string& path) {
  if (t.epochs == 0) throw ConfigError(path + ".epochs: must be positive");
  if (!(t.learning_rate > 0.0)) throw ConfigError(path + ".learning_rate: must be positive");
  if (t.batch_size == 0) throw ConfigError(path + ".batch_size: must be positive");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("error writing " + path.string());
}

NetworkDims network_dims(const ExperimentConfig& cfg) {
  NetworkDims d = cfg.dims;
  d.input_size = cfg.task.input_dim;
  d.output_classes = cfg.task.classes;
  return d;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ObjectReader root(j, "");
  std::string preset = "bitfusion";
  root.read("preset", preset);
  ExperimentConfig c = preset_config(preset);

  if (root.has("task")) {
    ObjectReader r(root.raw("task"), "task");
    r.read("seed", c.task.seed);
    r.read("seq_len", c.task.seq_len);
    r.read("input_dim", c.task.input_dim);
    r.read("classes", c.task.classes);
    r.read("train_count", c.task.train_count);
    r.read("validation_count", c.task.validation_count);
    r.read("test_count", c.task.test_count);
    r.read("noise", c.task.noise);
    r.finish();
  }
  if (root.has("network")) {
    ObjectReader r(root.raw("network"), "network");
    r.read("hidden_size", c.dims.hidden_size);
    r.read("num_directions", c.dims.num_directions);
    r.read("sru_layers", c.dims.sru_layers);
    r.finish();
  }
  if (root.has("train")) {
    ObjectReader r(root.raw("train"), "train");
    read_train(r, c.train, true);
    r.finish();
  }
  root.read("profile", c.profile);
  if (root.has("objectives")) {
    const json& v = root.raw("objectives");
    if (!v.is_array()) throw ConfigError("objectives: expected an array of strings");
    c.objectives.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw ConfigError("objectives[" + std::to_string(i) + "]: expected a string");
      try {
        c.objectives.push_back(objective_from_string(v[i].get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError("objectives[" + std::to_string(i) + "]: " + e.what());
      }
    }
  }
  if (root.has("constraints")) {
    ObjectReader r(root.raw("constraints"), "constraints");
    r.read("min_compression_ratio", c.min_compression_ratio);
    bool abs = r.has("error_threshold");
    bool rel = r.has("error_margin_over_baseline");
    if (abs) r.read("error_threshold", c.error_threshold);
    if (rel) r.read("error_margin_over_baseline", c.error_margin_over_baseline);
    if (abs && c.error_threshold && !rel) c.error_margin_over_baseline.reset();
    if (rel && c.error_margin_over_baseline && !abs) c.error_threshold.reset();
    r.finish();
  }
  if (root.has("ga")) {
    ObjectReader r(root.raw("ga"), "ga");
    r.read("population_size", c.ga.population_size);
    r.read("initial_population_size", c.ga.initial_population_size);
    r.read("generations", c.ga.generations);
    r.read("crossover_prob", c.ga.crossover_prob);
    r.read("mutation_prob", c.ga.mutation_prob);
    r.read("seed", c.ga.seed);
    r.finish();
  }
  if (root.has("search")) {
    ObjectReader r(root.raw("search"), "search");
    std::string mode = to_string(c.mode);
    r.read("mode", mode);
    try {
      c.mode = search_mode_from_string(mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("search.mode: ") + e.what());
    }
    r.read("eval_split_seed", c.eval_split_seed);
    r.read("calibration_sequences", c.calibration_sequences);
    if (r.has("dynamic_threshold")) {
      const json& v = r.raw("dynamic_threshold");
      if (v.is_string() && v.get<std::string>() == "inf") {
        c.dynamic_threshold = kNoRetrainThreshold;
      } else if (v.is_number_unsigned()) {
        c.dynamic_threshold = v.get<std::size_t>();
      } else {
        throw ConfigError("search.dynamic_threshold: expected a non-negative integer or \"inf\"");
      }
    }
    r.read("beacon_budget", c.beacon_budget);
    r.read("beacon_error_margin", c.beacon_error_margin);
    r.finish();
  }
  if (root.has("retrain")) {
    ObjectReader r(root.raw("retrain"), "retrain");
    read_train(r, c.retrain, false);
    r.finish();
  }
  root.finish();
  validate_config(c);
  return c;
}

void validate_config(const ExperimentConfig& c) {
  if (c.task.seq_len == 0) throw ConfigError("task.seq_len: must be positive");
  if (c.task.input_dim == 0) throw ConfigError("task.input_dim: must be positive");
  if (c.task.classes < 2) throw ConfigError("task.classes: must be at least 2");
  if (c.task.train_count == 0) throw ConfigError("task.train_count: must be positive");
  if (c.task.validation_count < 2) throw ConfigError("task.validation_count: must be at least 2");
  if (c.task.test_count == 0) throw ConfigError("task.test_count: must be positive");
  if (c.task.noise < 0.0) throw ConfigError("task.noise: must be non-negative");
  if (c.dims.hidden_size == 0) throw ConfigError("network.hidden_size: must be positive");
  if (c.dims.num_directions == 0) throw ConfigError("network.num_directions: must be positive");
  if (c.dims.sru_layers == 0) throw ConfigError("network.sru_layers: must be positive");
  check_train(c.train, "train");
  check_train(c.retrain, "retrain");
  if (c.error_threshold.has_value() == c.error_margin_over_baseline.has_value()) {
    throw ConfigError("constraints: set exactly one of error_threshold and error_margin_over_baseline");
  }
  if (c.error_threshold && !(*c.error_threshold > 0.0 && *c.error_threshold <= 1.0)) {
    throw ConfigError("constraints.error_threshold: must lie in (0, 1]");
  }
  if (c.error_margin_over_baseline && !(*c.error_margin_over_baseline >= 0.0)) {
    throw ConfigError("constraints.error_margin_over_baseline: must be non-negative");
  }
  if (c.min_compression_ratio && !(*c.min_compression_ratio > 0.0)) {
    throw ConfigError("constraints.min_compression_ratio: must be positive");
  }
  try {
    validate_ga_config(c.ga);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("ga: ") + e.what());
  }
  if (c.calibration_sequences == 0 || c.calibration_sequences > c.task.validation_count) {
    throw ConfigError("search.calibration_sequences: must lie in [1, task.validation_count]");
  }
  if (c.beacon_error_margin < 0.0) throw ConfigError("search.beacon_error_margin: must be non-negative");
  HwProfile profile;
  try {
    profile = resolve_profile(c.profile);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("profile: ") + e.what());
  }
  SearchSettings s;
  s.objectives = c.objectives;
  s.min_compression_ratio = c.min_compression_ratio;
  try {
    validate_settings(s, profile);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json objectives = json::array();
  for (Objective o : c.objectives) objectives.push_back(to_string(o));
  json j;
  j["preset"] = c.preset;
  j["task"] = {{"seed", c.task.seed},
               {"seq_len", c.task.seq_len},
               {"input_dim", c.task.input_dim},
               {"classes", c.task.classes},
               {"train_count", c.task.train_count},
               {"validation_count", c.task.validation_count},
               {"test_count", c.task.test_count},
               {"noise", c.task.noise}};
  j["network"] = {{"hidden_size", c.dims.hidden_size},
                  {"num_directions", c.dims.num_directions},
                  {"sru_layers", c.dims.sru_layers}};
  j["train"] = train_json(c.train, true);
  j["profile"] = c.profile;
  j["objectives"] = objectives;
  j["constraints"] = {{"min_compression_ratio", optional_json(c.min_compression_ratio)},
                      {"error_threshold", optional_json(c.error_threshold)},
                      {"error_margin_over_baseline", optional_json(c.error_margin_over_baseline)}};
  j["ga"] = {{"population_size", c.ga.population_size},
             {"initial_population_size", c.ga.initial_population_size},
             {"generations", c.ga.generations},
             {"crossover_prob", c.ga.crossover_prob},
             {"mutation_prob", optional_json(c.ga.mutation_prob)},
             {"seed", c.ga.seed}};
  j["search"] = {{"mode", to_string(c.mode)},
                 {"eval_split_seed", c.eval_split_seed},
                 {"calibration_sequences", c.calibration_sequences},
                 {"dynamic_threshold", c.dynamic_threshold == kNoRetrainThreshold ? json("inf")
                                                                                 : json(c.dynamic_threshold)},
                 {"beacon_budget", c.beacon_budget},
                 {"beacon_error_margin", c.beacon_error_margin}};
  j["retrain"] = train_json(c.retrain, false);
  return j;
}

HwProfile resolve_profile(const std::string& name_or_path) {
  if (name_or_path == "silago") return silago_profile();
  if (name_or_path == "bitfusion") return bitfusion_profile();
  if (!fs::exists(name_or_path)) {
    throw std::invalid_argument("'" + name_or_path + "' is neither a built-in profile nor an existing file");
  }
  return load_profile(name_or_path);
}

ExperimentData prepare_data(const ExperimentConfig& cfg) {
  ExperimentData d;
  d.data = make_synthetic_task(cfg.task);
  for (std::size_t i : stratified_half(d.data.validation, cfg.eval_split_seed)) {
    d.eval_split.push_back(d.data.validation[i]);
  }
  auto calib = std::span<const LabeledSequence>(d.data.validation).subspan(0, cfg.calibration_sequences);
  d.calibration_inputs = features_of(calib);
  return d;
}

TrainSummary cmd_train(const ExperimentConfig& cfg, const fs::path& checkpoint) {
  validate_config(cfg);
  Dataset data = make_synthetic_task(cfg.task);
  TrainReport report;
  SruNetwork net = train_baseline(network_dims(cfg), data, cfg.train, &report);
  if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());
  save_checkpoint(net, checkpoint);
  TrainSummary s{network_digest(net), report.validation_error, report.epoch_loss};
  json j = {{"digest", s.digest},
            {"validation_error", s.validation_error},
            {"epoch_loss", s.epoch_loss},
            {"parameters", net.total_param_count()},
            {"config", to_json(cfg)}};
  write_text(fs::path(checkpoint.string() + ".summary.json"), j.dump(2) + "\n");
  return s;
}

std::unique_ptr<SearchProblem> make_search_problem(const ExperimentConfig& cfg, const SruNetwork& baseline,
                                                   const ExperimentData& data, double* baseline_error,
                                                   double* threshold) {
  if (!(baseline.dims == network_dims(cfg))) {
    throw std::invalid_argument("checkpoint dimensions do not match the configuration");
  }
  SearchSettings s;
  s.objectives = cfg.objectives;
  s.min_compression_ratio = cfg.min_compression_ratio;
  s.mode = cfg.mode;
  s.dynamic_threshold = cfg.dynamic_threshold;
  s.beacon_budget = cfg.beacon_budget;
  s.beacon_error_margin = cfg.beacon_error_margin;
  s.retrain = cfg.retrain;
  s.retrain.max_validation_error.reset();
  double base = classification_error(baseline, data.eval_split);
  s.error_threshold = cfg.error_threshold ? *cfg.error_threshold : std::min(1.0, base + *cfg.error_margin_over_baseline);
  if (baseline_error) *baseline_error = base;
  if (threshold) *threshold = s.error_threshold;
  return std::make_unique<SearchProblem>(baseline, resolve_profile(cfg.profile), s, data.eval_split,
                                         data.data.train, data.calibration_inputs);
}

void save_beacons(const SearchProblem& problem, const fs::path& dir) {
  auto sources = problem.beacon_sources();
  if (sources.empty()) return;
  fs::create_directories(dir);
  json list = json::array();
  for (const auto* s : sources) {
    save_checkpoint(s->net, dir / (s->name + ".mohaq"));
    json entry = {{"name", s->name}, {"digest", network_digest(s->net)}};
    if (s->beacon) {
      json assignment = json::array();
      for (const auto& lp : s->beacon->source_assignment.layers) {
        assignment.push_back({encoded(lp.weight), encoded(lp.activation)});
      }
      entry["kind"] = to_string(s->beacon->kind);
      entry["source_genome"] = s->beacon->source_genome;
      entry["source_assignment"] = assignment;
    }
    list.push_back(entry);
  }
  write_text(dir / "beacons.json", list.dump(2) + "\n");
}

void load_beacons(SearchProblem& problem, const fs::path& dir, std::span<const Matrix> calibration_inputs) {
  json list;
  try {
    list = json::parse(read_text(dir / "beacons.json"));
  } catch (const json::exception& e) {
    throw std::runtime_error((dir / "beacons.json").string() + ": " + e.what());
  }
  static const std::vector<std::pair<std::string, BeaconKind>> kinds = {
      {"general", BeaconKind::General},
      {"first-layer-2bit", BeaconKind::FirstLayer2Bit},
      {"first-layer-fix16", BeaconKind::FirstLayerFix16},
      {"dynamic", BeaconKind::Dynamic}};
  try {
    for (const auto& entry : list) {
      std::string name = entry.at("name").get<std::string>();
      SruNetwork net = load_checkpoint(dir / (name + ".mohaq"));
      if (network_digest(net) != entry.at("digest").get<std::string>()) {
        throw std::runtime_error("beacon '" + name + "' checkpoint digest mismatch");
      }
      std::optional<Beacon> beacon;
      if (entry.contains("kind")) {
        Beacon b;
        b.parameters = net;
        b.source_genome = entry.at("source_genome").get<Genome>();
        for (const auto& pair : entry.at("source_assignment")) {
          b.source_assignment.layers.push_back(
              {precision_from_code(pair.at(0).get<int>()), precision_from_code(pair.at(1).get<int>())});
        }
        std::string kind = entry.at("kind").get<std::string>();
        auto it = std::find_if(kinds.begin(), kinds.end(), [&](const auto& k) { return k.first == kind; });
        if (it == kinds.end()) throw std::runtime_error("beacon '" + name + "' has unknown kind '" + kind + "'");
        b.kind = it->second;
        beacon = std::move(b);
      }
      problem.add_beacon_source(make_source(name, std::move(net), calibration_inputs, std::move(beacon)));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error((dir / "beacons.json").string() + ": " + e.what());
  }
}

SearchSummary cmd_search(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir,
                         std::size_t jobs) {
  validate_config(cfg);
  SruNetwork baseline = load_checkpoint(checkpoint);
  ExperimentData data = prepare_data(cfg);
  SearchSummary summary;
  auto problem = make_search_problem(cfg, baseline, data, &summary.baseline_error, &summary.error_threshold);
  if (cfg.mode == SearchMode::BeaconFixed3) problem->build_fixed_beacons();

  GaConfig ga = cfg.ga;
  ga.jobs = std::max<std::size_t>(1, jobs);
  summary.result = run_search(*problem, ga, data.data.test);

  fs::create_directories(out_dir);
  std::ostringstream csv;
  write_pareto_csv(csv, summary.result.records);
  write_text(out_dir / "pareto.csv", csv.str());
  std::ostringstream log;
  write_eval_log(log, summary.result.log);
  write_text(out_dir / "eval_log.jsonl", log.str());
  write_text(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
  save_beacons(*problem, out_dir / "beacons");

  const auto& recs = summary.result.records;
  std::ostringstream txt;
  txt << "mode: " << to_string(cfg.mode) << "\n";
  txt << "profile: " << problem->profile().name << "\n";
  txt << "objectives:";
  for (Objective o : cfg.objectives) txt << ' ' << to_string(o);
  txt << "\n";
  txt << "evaluations: " << summary.result.evaluations << "\n";
  txt << "baseline error (evaluation split): " << format_number(summary.baseline_error) << "\n";
  txt << "error threshold: " << format_number(summary.error_threshold) << "\n";
  if (cfg.min_compression_ratio) txt << "min compression ratio: " << format_number(*cfg.min_compression_ratio) << "\n";
  txt << "beacons: " << problem->beacon_sources().size() << "\n";
  txt << "front size: " << recs.size() << "\n";
  if (!recs.empty()) {
    auto best = [&](auto key, bool smaller) {
      return *std::min_element(recs.begin(), recs.end(), [&](const ParetoRecord& a, const ParetoRecord& b) {
        return smaller ? key(a) < key(b) : key(a) > key(b);
      });
    };
    const auto& e = best([](const ParetoRecord& r) { return r.validation_error; }, true);
    txt << "best error: " << format_number(e.validation_error) << " (" << genome_to_string(e.genome) << ", "
        << to_string(e.assignment) << ")\n";
    const auto& sp = best([](const ParetoRecord& r) { return r.speedup; }, false);
    txt << "best speedup: " << format_number(sp.speedup) << " (" << genome_to_string(sp.genome) << ")\n";
    const auto& cp = best([](const ParetoRecord& r) { return r.compression_ratio; }, false);
    txt << "best compression ratio: " << format_number(cp.compression_ratio) << " (" << genome_to_string(cp.genome)
        << ")\n";
    if (problem->profile().has_energy()) {
      const auto& en = best([](const ParetoRecord& r) { return r.energy_j.value_or(0.0); }, true);
      txt << "best energy J: " << format_number(*en.energy_j) << " (" << genome_to_string(en.genome) << ")\n";
    }
  }
  write_text(out_dir / "summary.txt", txt.str());
  return summary;
}

VerifyReport cmd_verify(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& pareto_csv,
                        std::size_t jobs) {
  validate_config(cfg);
  VerifyReport report;
  std::vector<CsvRow> rows;
  {
    std::ifstream in(pareto_csv, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + pareto_csv.string());
    try {
      rows = read_pareto_csv(in);
    } catch (const std::runtime_error& e) {
      report.failures.push_back(e.what());
      return report;
    }
  }
  report.rows = rows.size();
  SruNetwork baseline = load_checkpoint(checkpoint);
  ExperimentData data = prepare_data(cfg);
  auto problem = make_search_problem(cfg, baseline, data);
  fs::path beacon_dir = pareto_csv.parent_path() / "beacons";
  if (fs::exists(beacon_dir / "beacons.json")) load_beacons(*problem, beacon_dir, data.calibration_inputs);

  std::vector<std::optional<ParetoRecord>> records(rows.size());
  std::vector<std::string> problems(rows.size());
  parallel_for(rows.size(), std::max<std::size_t>(1, jobs), [&](std::size_t i) {
    const CsvRow& row = rows[i];
    const std::string label = "row " + std::to_string(i + 1) + " (" + row.solution + ")";
    try {
      Genome g = parse_genome(row.genome);
      if (g.size() != problem->genome_length()) {
        problems[i] = label + ": genome length " + std::to_string(g.size()) + ", expected " +
                      std::to_string(problem->genome_length());
        return;
      }
      ParetoRecord r = evaluate_record(*problem, g, row.beacon, data.data.test);
      CsvRow expect = to_csv_row(r, i);
      std::string msg;
      auto cmp = [&](const char* name, const std::string& got, const std::string& want) {
        if (got != want) msg += std::string(msg.empty() ? "" : "; ") + name + " " + got + " != recomputed " + want;
      };
      cmp("solution", row.solution, expect.solution);
      cmp("wer_v", row.wer_v, expect.wer_v);
      cmp("wer_t", row.wer_t, expect.wer_t);
      cmp("cp_r", row.cp_r, expect.cp_r);
      cmp("speedup", row.speedup, expect.speedup);
      cmp("energy_J", row.energy_j, expect.energy_j);
      auto hw = problem->hardware(r.assignment);
      if (hw.memory_violation > 0.0) msg += std::string(msg.empty() ? "" : "; ") + "exceeds the memory budget";
      if (r.validation_error > problem->settings().error_threshold) {
        msg += std::string(msg.empty() ? "" : "; ") + "error above the feasibility threshold";
      }
      if (!msg.empty()) problems[i] = label + ": " + msg;
      records[i] = std::move(r);
    } catch (const std::exception& e) {
      problems[i] = label + ": " + e.what();
    }
  });
  for (const auto& p : problems) {
    if (!p.empty()) report.failures.push_back(p);
  }
  std::set<std::string> genomes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!genomes.insert(rows[i].genome).second) {
      report.failures.push_back("row " + std::to_string(i + 1) + " (" + rows[i].solution + "): duplicate genome");
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = 0; j < records.size(); ++j) {
      if (i == j || !records[i] || !records[j]) continue;
      if (pareto_dominates(records[j]->objectives, records[i]->objectives)) {
        report.failures.push_back("row " + std::to_string(i + 1) + " (" + rows[i].solution + "): dominated by row " +
                                  std::to_string(j + 1) + " (" + rows[j].solution + ")");
        break;
      }
    }
  }
  return report;
}

}  // namespace mohaq
