#include "mohaq/hw_cost.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace mohaq {

namespace {

constexpr int kFloatBits = 32;
constexpr int kAuxBits = 16;

bool valid_bits(int bits) { return bits == 2 || bits == 4 || bits == 8 || bits == 16; }

PrecisionPair pair_of(const LayerPrecision& lp) {
  return {bit_width(lp.weight), bit_width(lp.activation)};
}

void check_assignment(std::span<const LayerSpec> arch, const QuantAssignment& assignment) {
  if (assignment.layers.size() != arch.size()) {
    throw std::invalid_argument("assignment has " + std::to_string(assignment.layers.size()) +
                                " layers, architecture has " + std::to_string(arch.size()));
  }
}

PrecisionPair parse_pair(const std::string& key) {
  auto x = key.find('x');
  if (x == std::string::npos) throw std::invalid_argument("precision pair key '" + key + "' is not WxA");
  try {
    std::size_t used_w = 0, used_a = 0;
    std::string ws = key.substr(0, x), as = key.substr(x + 1);
    int w = std::stoi(ws, &used_w);
    int a = std::stoi(as, &used_a);
    if (used_w != ws.size() || used_a != as.size()) throw std::invalid_argument("trailing");
    return {w, a};
  } catch (const std::exception&) {
    throw std::invalid_argument("precision pair key '" + key + "' is not WxA");
  }
}

std::vector<int> parse_bit_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(" \t");
    auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw std::invalid_argument("general." + key + ": empty entry");
    item = item.substr(b, e - b + 1);
    try {
      std::size_t used = 0;
      int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument("trailing");
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument("general." + key + ": '" + item + "' is not an integer");
    }
  }
  if (out.empty()) throw std::invalid_argument("general." + key + ": empty list");
  return out;
}

double parse_number(const std::string& where, const std::string& text) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": '" + text + "' is not a number");
  }
}

bool parse_bool(const std::string& where, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument(where + ": '" + text + "' is not a boolean");
}

}  // namespace

std::string to_string(PrecisionPair pair) {
  return std::to_string(pair.weight_bits) + "x" + std::to_string(pair.activation_bits);
}

bool HwProfile::supports(Precision p) const {
  int b = bit_width(p);
  return std::find(weight_bits.begin(), weight_bits.end(), b) != weight_bits.end() &&
         std::find(activation_bits.begin(), activation_bits.end(), b) != activation_bits.end();
}

double HwProfile::speedup_of(PrecisionPair pair) const {
  auto it = speedup.find(pair);
  if (it == speedup.end()) {
    throw UnsupportedPrecision("profile " + name + " has no speedup for " + to_string(pair));
  }
  return it->second;
}

double HwProfile::mac_energy_of(PrecisionPair pair) const {
  if (!mac_energy_pj) throw std::invalid_argument("profile " + name + " has no energy table");
  auto it = mac_energy_pj->find(pair);
  if (it == mac_energy_pj->end()) {
    throw UnsupportedPrecision("profile " + name + " has no MAC energy for " + to_string(pair));
  }
  return it->second;
}

double bitfusion_speedup(int weight_bits, int activation_bits) {
  if (!valid_bits(weight_bits) || !valid_bits(activation_bits)) {
    throw UnsupportedPrecision("bitfusion supports 2, 4, 8 and 16 bits");
  }
  double bricks = (std::max(weight_bits, 2) / 2.0) * (std::max(activation_bits, 2) / 2.0);
  return 64.0 / bricks;
}

HwProfile silago_profile() {
  HwProfile p;
  p.name = "silago";
  p.weight_bits = {4, 8, 16};
  p.activation_bits = {4, 8, 16};
  p.tie_wa = true;
  p.count_elementwise = true;
  p.speedup = {{{16, 16}, 1.0}, {{8, 8}, 2.0}, {{4, 4}, 4.0}};
  p.mac_energy_pj = std::map<PrecisionPair, double>{
      {{16, 16}, 1.666}, {{8, 8}, 0.542}, {{4, 4}, 0.153}};
  p.bit_transfer_energy_pj = 0.08;
  return p;
}

HwProfile bitfusion_profile() {
  HwProfile p;
  p.name = "bitfusion";
  p.weight_bits = {2, 4, 8, 16};
  p.activation_bits = {2, 4, 8, 16};
  p.tie_wa = false;
  p.count_elementwise = false;
  for (int w : p.weight_bits)
    for (int a : p.activation_bits) p.speedup[{w, a}] = bitfusion_speedup(w, a);
  return p;
}

BuiltinProfiles builtin_profiles() { return {silago_profile(), bitfusion_profile()}; }

void validate_profile(const HwProfile& profile) {
  if (profile.name.empty()) throw std::invalid_argument("general.name: missing");
  for (const auto* list : {&profile.weight_bits, &profile.activation_bits}) {
    const char* key = list == &profile.weight_bits ? "general.weight_bits" : "general.activation_bits";
    if (list->empty()) throw std::invalid_argument(std::string(key) + ": empty");
    for (int b : *list) {
      if (!valid_bits(b)) {
        throw std::invalid_argument(std::string(key) + ": " + std::to_string(b) +
                                    " is not one of 2, 4, 8, 16");
      }
    }
  }
  auto it = profile.speedup.find({16, 16});
  if (it == profile.speedup.end() || it->second != 1.0) {
    throw std::invalid_argument("speedup.16x16: must be 1");
  }
  for (const auto& [pair, s] : profile.speedup) {
    if (!valid_bits(pair.weight_bits) || !valid_bits(pair.activation_bits)) {
      throw std::invalid_argument("speedup." + to_string(pair) + ": unsupported bit width");
    }
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("speedup." + to_string(pair) + ": must be positive");
    }
  }
  auto required = [&](auto&& check) {
    for (int w : profile.weight_bits) {
      for (int a : profile.activation_bits) {
        if (profile.tie_wa && w != a) continue;
        check(PrecisionPair{w, a});
      }
    }
  };
  required([&](PrecisionPair pr) {
    if (!profile.speedup.contains(pr)) {
      throw std::invalid_argument("speedup." + to_string(pr) + ": missing for a supported pair");
    }
  });
  if (profile.mac_energy_pj) {
    for (const auto& [pair, e] : *profile.mac_energy_pj) {
      if (!(e > 0.0) || !std::isfinite(e)) {
        throw std::invalid_argument("energy." + to_string(pair) + ": must be positive");
      }
    }
    required([&](PrecisionPair pr) {
      if (!profile.mac_energy_pj->contains(pr)) {
        throw std::invalid_argument("energy." + to_string(pr) + ": missing for a supported pair");
      }
    });
    if (profile.count_elementwise && !profile.mac_energy_pj->contains({16, 16})) {
      throw std::invalid_argument("energy.16x16: needed for element-wise operations");
    }
  }
  if (profile.bit_transfer_energy_pj < 0.0 || !std::isfinite(profile.bit_transfer_energy_pj)) {
    throw std::invalid_argument("general.bit_transfer_energy_pj: must be non-negative");
  }
  if (profile.sram_bytes && *profile.sram_bytes == 0) {
    throw std::invalid_argument("general.sram_bytes: must be positive");
  }
}

HwProfile parse_profile(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument("profile: " + e.message() + " at line " + std::to_string(e.line()));
  }

  for (const auto& [section, _] : tree) {
    if (section != "general" && section != "speedup" && section != "energy") {
      throw std::invalid_argument(section + ": unknown section");
    }
  }
  auto general = tree.get_child_optional("general");
  if (!general) throw std::invalid_argument("general: missing section");

  HwProfile p;
  bool have_w = false, have_a = false;
  for (const auto& [key, node] : *general) {
    const std::string value = node.data();
    const std::string where = "general." + key;
    if (key == "name") {
      p.name = value;
    } else if (key == "weight_bits") {
      p.weight_bits = parse_bit_list(key, value);
      have_w = true;
    } else if (key == "activation_bits") {
      p.activation_bits = parse_bit_list(key, value);
      have_a = true;
    } else if (key == "tie_wa") {
      p.tie_wa = parse_bool(where, value);
    } else if (key == "count_elementwise") {
      p.count_elementwise = parse_bool(where, value);
    } else if (key == "bit_transfer_energy_pj") {
      p.bit_transfer_energy_pj = parse_number(where, value);
    } else if (key == "sram_bytes") {
      double v = parse_number(where, value);
      if (v <= 0 || v != std::floor(v)) throw std::invalid_argument(where + ": must be a positive integer");
      p.sram_bytes = static_cast<std::uint64_t>(v);
    } else {
      throw std::invalid_argument(where + ": unknown key");
    }
  }
  if (!have_w) throw std::invalid_argument("general.weight_bits: missing");
  if (!have_a) throw std::invalid_argument("general.activation_bits: missing");

  auto speed = tree.get_child_optional("speedup");
  if (!speed) throw std::invalid_argument("speedup: missing section");
  for (const auto& [key, node] : *speed) {
    p.speedup[parse_pair(key)] = parse_number("speedup." + key, node.data());
  }
  if (auto en = tree.get_child_optional("energy")) {
    std::map<PrecisionPair, double> table;
    for (const auto& [key, node] : *en) table[parse_pair(key)] = parse_number("energy." + key, node.data());
    p.mac_energy_pj = std::move(table);
  }
  validate_profile(p);
  return p;
}

HwProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_profile(ss.str());
}

std::uint64_t memory_size_bits(std::span<const LayerSpec> arch, const QuantAssignment& assignment) {
  check_assignment(arch, assignment);
  std::uint64_t bits = 0;
  for (std::size_t l = 0; l < arch.size(); ++l) {
    bits += static_cast<std::uint64_t>(arch[l].weight_count_mxv()) *
            static_cast<std::uint64_t>(bit_width(assignment.layers[l].weight));
    bits += static_cast<std::uint64_t>(arch[l].aux_param_count()) * kAuxBits;
  }
  return bits;
}

std::uint64_t float_baseline_bits(std::span<const LayerSpec> arch) {
  std::uint64_t n = 0;
  for (const auto& l : arch) n += l.total_param_count();
  return n * kFloatBits;
}

std::map<PrecisionPair, std::uint64_t> mac_counts(std::span<const LayerSpec> arch,
                                                  const QuantAssignment& assignment,
                                                  const HwProfile& profile, std::size_t seq_len) {
  check_assignment(arch, assignment);
  std::map<PrecisionPair, std::uint64_t> counts;
  for (std::size_t l = 0; l < arch.size(); ++l) {
    const auto& lp = assignment.layers[l];
    if (profile.tie_wa && lp.weight != lp.activation) {
      throw UnsupportedPrecision("profile " + profile.name + " requires equal weight and activation precision (layer " +
                                 std::to_string(l) + ")");
    }
    PrecisionPair pr = pair_of(lp);
    profile.speedup_of(pr);  // rejects unsupported pairs
    auto macs = static_cast<std::uint64_t>(arch[l].mac_count(seq_len));
    if (macs > 0) counts[pr] += macs;
    if (profile.count_elementwise) {
      auto ew = static_cast<std::uint64_t>(arch[l].elementwise_ops_per_step() * seq_len);
      if (ew > 0) counts[{16, 16}] += ew;
    }
  }
  return counts;
}

double speedup(std::span<const LayerSpec> arch, const QuantAssignment& assignment,
               const HwProfile& profile, std::size_t seq_len) {
  auto counts = mac_counts(arch, assignment, profile, seq_len);
  double num = 0.0;
  std::uint64_t total = 0;
  for (const auto& [pr, n] : counts) {
    num += profile.speedup_of(pr) * static_cast<double>(n);
    total += n;
  }
  if (total == 0) return 1.0;
  return num / static_cast<double>(total);
}

double energy(std::span<const LayerSpec> arch, const QuantAssignment& assignment,
              const HwProfile& profile, std::size_t seq_len) {
  if (!profile.has_energy()) throw std::invalid_argument("profile " + profile.name + " has no energy table");
  auto counts = mac_counts(arch, assignment, profile, seq_len);
  double pj = 0.0;
  for (const auto& [pr, n] : counts) pj += static_cast<double>(n) * profile.mac_energy_of(pr);
  pj += static_cast<double>(memory_size_bits(arch, assignment)) * profile.bit_transfer_energy_pj;
  return pj * 1e-12;
}

CostReport cost_report(std::span<const LayerSpec> arch, const QuantAssignment& assignment,
                       const HwProfile& profile, std::size_t seq_len) {
  CostReport r;
  r.model_bits = memory_size_bits(arch, assignment);
  for (const auto& l : arch) r.total_params += l.total_param_count();
  r.compression_ratio = static_cast<double>(kFloatBits * r.total_params) / static_cast<double>(r.model_bits);
  r.mac_counts = mac_counts(arch, assignment, profile, seq_len);
  for (const auto& [_, n] : r.mac_counts) r.total_macs += n;
  r.speedup = speedup(arch, assignment, profile, seq_len);
  if (profile.has_energy()) r.energy_j = energy(arch, assignment, profile, seq_len);
  return r;
}

}  // namespace mohaq
