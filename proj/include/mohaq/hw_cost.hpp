#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mohaq/sru_net.hpp"

namespace mohaq {

struct PrecisionPair {
  int weight_bits = 16;
  int activation_bits = 16;
  auto operator<=>(const PrecisionPair&) const = default;
};

std::string to_string(PrecisionPair pair);  // "WxA"

class UnsupportedPrecision : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct HwProfile {
  std::string name;
  std::vector<int> weight_bits;
  std::vector<int> activation_bits;
  bool tie_wa = false;             // weight and activation precision must match per layer
  bool count_elementwise = false;  // element-wise ops enter N_T at the 16x16 rate
  std::map<PrecisionPair, double> speedup;                    // relative to 16x16
  std::optional<std::map<PrecisionPair, double>> mac_energy_pj;
  double bit_transfer_energy_pj = 0.0;
  std::optional<std::uint64_t> sram_bytes;

  bool supports(Precision p) const;
  bool has_energy() const { return mac_energy_pj.has_value(); }
  double speedup_of(PrecisionPair pair) const;
  double mac_energy_of(PrecisionPair pair) const;
};

HwProfile silago_profile();
HwProfile bitfusion_profile();

// Fused-PE brick count: 64 / ((max(w,2)/2) * (max(a,2)/2)).
double bitfusion_speedup(int weight_bits, int activation_bits);

struct BuiltinProfiles {
  HwProfile silago;
  HwProfile bitfusion;
};
BuiltinProfiles builtin_profiles();

// Sections [general], [speedup], [energy]; pairs keyed "WxA".
HwProfile parse_profile(const std::string& text);
HwProfile load_profile(const std::filesystem::path& path);
// Throws std::invalid_argument naming the offending key.
void validate_profile(const HwProfile& profile);

struct CostReport {
  std::uint64_t model_bits = 0;
  std::uint64_t total_params = 0;
  double compression_ratio = 1.0;  // 32-bit float baseline / model_bits
  double speedup = 1.0;
  std::optional<double> energy_j;
  std::map<PrecisionPair, std::uint64_t> mac_counts;  // N_i
  std::uint64_t total_macs = 0;                       // N_T
};

std::uint64_t memory_size_bits(std::span<const LayerSpec> arch, const QuantAssignment& assignment);
std::uint64_t float_baseline_bits(std::span<const LayerSpec> arch);

// N_i per precision pair over `seq_len` steps, including element-wise ops when the
// profile counts them.
std::map<PrecisionPair, std::uint64_t> mac_counts(std::span<const LayerSpec> arch,
                                                  const QuantAssignment& assignment,
                                                  const HwProfile& profile, std::size_t seq_len);

double speedup(std::span<const LayerSpec> arch, const QuantAssignment& assignment,
               const HwProfile& profile, std::size_t seq_len);

double energy(std::span<const LayerSpec> arch, const QuantAssignment& assignment,
              const HwProfile& profile, std::size_t seq_len);

CostReport cost_report(std::span<const LayerSpec> arch, const QuantAssignment& assignment,
                       const HwProfile& profile, std::size_t seq_len);

}  // namespace mohaq
