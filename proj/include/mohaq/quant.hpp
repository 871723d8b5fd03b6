#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mohaq/precision.hpp"

namespace mohaq {

// Signed 16-bit fixed point: 1 sign bit, integer_bits, fraction_bits.
struct FixedPointFormat {
  int integer_bits = 0;
  int fraction_bits = 15;

  double step() const;       // 2^-fraction_bits
  double max_value() const;  // 2^integer_bits - step
  double min_value() const;  // -2^integer_bits
  bool operator==(const FixedPointFormat&) const = default;
};

struct IntQuantParams {
  double clip_threshold = 1.0;
  double scale = 1.0;  // max_level / clip_threshold
  Precision precision = Precision::Int8;
};

// Maps an integer-domain M×V result back to its real range.
struct RequantScale {
  double value = 1.0;
};

inline constexpr int kMmseGridSize = 1000;

// Round half away from zero; the single rounding mode used everywhere.
double round_half_away(double x);

IntQuantParams make_int_params(double clip_threshold, Precision precision);

int quantize_int_scalar(double x, const IntQuantParams& params);
std::vector<int> quantize_int(std::span<const double> data, const IntQuantParams& params);
std::vector<double> dequantize_int(std::span<const int> levels, const IntQuantParams& params);

// Sum of squared reconstruction errors when clipping at `clip_threshold`.
double clip_sse(std::span<const double> data, double clip_threshold, Precision precision);

// Threshold minimizing the squared error over the grid max|x|·k/1000, k = 1..1000.
// The smallest k wins ties. All-zero data gives threshold 1.
IntQuantParams mmse_clip_threshold(std::span<const double> data, Precision precision);

FixedPointFormat fixed16_format_for_range(double max_abs);
FixedPointFormat fixed16_format_for(std::span<const double> data);

double quantize_fixed16_scalar(double x, const FixedPointFormat& fmt);
std::vector<double> quantize_fixed16(std::span<const double> data, const FixedPointFormat& fmt);

std::vector<double> requantize_to_fixed16(std::span<const double> int_output, RequantScale scale,
                                          const FixedPointFormat& fmt);

}  // namespace mohaq
