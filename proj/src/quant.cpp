#include "mohaq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mohaq {

double FixedPointFormat::step() const { return std::ldexp(1.0, -fraction_bits); }

double FixedPointFormat::max_value() const { return std::ldexp(1.0, integer_bits) - step(); }

double FixedPointFormat::min_value() const { return -std::ldexp(1.0, integer_bits); }

double round_half_away(double x) { return std::round(x); }

IntQuantParams make_int_params(double clip_threshold, Precision precision) {
  if (!is_integer(precision)) {
    throw std::invalid_argument("integer quantization requested for FIX16");
  }
  if (!(clip_threshold > 0.0) || !std::isfinite(clip_threshold)) {
    throw std::invalid_argument("clip threshold must be positive and finite");
  }
  return {clip_threshold, static_cast<double>(max_level(precision)) / clip_threshold, precision};
}

int quantize_int_scalar(double x, const IntQuantParams& params) {
  const double c = params.clip_threshold;
  const double clipped = std::clamp(x, -c, c);
  const double level = round_half_away(clipped * params.scale);
  const double lo = min_level(params.precision);
  const double hi = max_level(params.precision);
  return static_cast<int>(std::clamp(level, lo, hi));
}

std::vector<int> quantize_int(std::span<const double> data, const IntQuantParams& params) {
  std::vector<int> out(data.size());
  std::transform(data.begin(), data.end(), out.begin(),
                 [&](double x) { return quantize_int_scalar(x, params); });
  return out;
}

std::vector<double> dequantize_int(std::span<const int> levels, const IntQuantParams& params) {
  std::vector<double> out(levels.size());
  std::transform(levels.begin(), levels.end(), out.begin(),
                 [&](int q) { return static_cast<double>(q) / params.scale; });
  return out;
}

double clip_sse(std::span<const double> data, double clip_threshold, Precision precision) {
  const IntQuantParams params = make_int_params(clip_threshold, precision);
  double sse = 0.0;
  for (double x : data) {
    const double err = x - static_cast<double>(quantize_int_scalar(x, params)) / params.scale;
    sse += err * err;
  }
  return sse;
}

IntQuantParams mmse_clip_threshold(std::span<const double> data, Precision precision) {
  if (data.empty()) {
    throw std::invalid_argument("empty calibration data");
  }
  double max_abs = 0.0;
  for (double x : data) max_abs = std::max(max_abs, std::abs(x));
  if (max_abs == 0.0) {
    return make_int_params(1.0, precision);
  }
  double best_c = max_abs;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= kMmseGridSize; ++k) {
    const double c = max_abs * static_cast<double>(k) / static_cast<double>(kMmseGridSize);
    const double sse = clip_sse(data, c, precision);
    if (sse < best_sse) {
      best_sse = sse;
      best_c = c;
    }
  }
  return make_int_params(best_c, precision);
}

FixedPointFormat fixed16_format_for_range(double max_abs) {
  if (!std::isfinite(max_abs) || max_abs >= std::ldexp(1.0, 15)) {
    throw std::domain_error("range exceeds fixed-point capacity");
  }
  int integer_bits = 0;
  while (max_abs > std::ldexp(1.0, integer_bits)) ++integer_bits;
  return {integer_bits, 15 - integer_bits};
}

FixedPointFormat fixed16_format_for(std::span<const double> data) {
  if (data.empty()) {
    throw std::invalid_argument("empty data for fixed-point format");
  }
  double max_abs = 0.0;
  for (double x : data) max_abs = std::max(max_abs, std::abs(x));
  return fixed16_format_for_range(max_abs);
}

double quantize_fixed16_scalar(double x, const FixedPointFormat& fmt) {
  const double raw = round_half_away(std::ldexp(x, fmt.fraction_bits));
  const double lo = -std::ldexp(1.0, 15);
  const double hi = std::ldexp(1.0, 15) - 1.0;
  return std::ldexp(std::clamp(raw, lo, hi), -fmt.fraction_bits);
}

std::vector<double> quantize_fixed16(std::span<const double> data, const FixedPointFormat& fmt) {
  std::vector<double> out(data.size());
  std::transform(data.begin(), data.end(), out.begin(),
                 [&](double x) { return quantize_fixed16_scalar(x, fmt); });
  return out;
}

std::vector<double> requantize_to_fixed16(std::span<const double> int_output, RequantScale scale,
                                          const FixedPointFormat& fmt) {
  if (!(scale.value > 0.0)) {
    throw std::invalid_argument("requantization scale must be positive");
  }
  std::vector<double> out(int_output.size());
  std::transform(int_output.begin(), int_output.end(), out.begin(),
                 [&](double v) { return quantize_fixed16_scalar(v / scale.value, fmt); });
  return out;
}

}  // namespace mohaq
