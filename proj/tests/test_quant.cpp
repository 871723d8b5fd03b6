#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mohaq/quant.hpp"
#include "oracles.hpp"

using namespace mohaq;

TEST_CASE("precision codes and integer ranges") {
  CHECK(encoded(Precision::Int2) == 1);
  CHECK(encoded(Precision::Int4) == 2);
  CHECK(encoded(Precision::Int8) == 3);
  CHECK(encoded(Precision::Fix16) == 4);
  CHECK(min_level(Precision::Int8) == -128);
  CHECK(max_level(Precision::Int8) == 127);
  CHECK(min_level(Precision::Int4) == -8);
  CHECK(max_level(Precision::Int4) == 7);
  CHECK(min_level(Precision::Int2) == -2);
  CHECK(max_level(Precision::Int2) == 1);
  CHECK_THROWS_AS(precision_from_code(0), std::invalid_argument);
  CHECK_THROWS_AS(precision_from_code(5), std::invalid_argument);
  for (Precision p : kAllPrecisions) CHECK(precision_from_code(encoded(p)) == p);
}

TEST_CASE("fixed-point format invariants") {
  for (int i = 0; i <= 15; ++i) {
    FixedPointFormat f{i, 15 - i};
    CHECK(f.integer_bits + f.fraction_bits + 1 == 16);
    CHECK(f.min_value() == -std::pow(2.0, i));
    CHECK(f.max_value() == std::pow(2.0, i) - std::pow(2.0, -(15 - i)));
  }
}

TEST_CASE("rounding is half away from zero") {
  CHECK(round_half_away(0.5) == 1.0);
  CHECK(round_half_away(-0.5) == -1.0);
  CHECK(round_half_away(2.5) == 3.0);
  CHECK(round_half_away(-2.5) == -3.0);
  CHECK(round_half_away(2.4999) == 2.0);
}

TEST_CASE("mmse threshold examples") {
  SUBCASE("single value") {
    std::vector<double> d{1.0};
    auto p = mmse_clip_threshold(d, Precision::Int8);
    CHECK(p.clip_threshold == 1.0);
    CHECK(quantize_int_scalar(1.0, p) == 127);
  }
  SUBCASE("all zeros") {
    std::vector<double> d(10, 0.0);
    auto p = mmse_clip_threshold(d, Precision::Int4);
    CHECK(p.clip_threshold == 1.0);
    CHECK(p.scale == 7.0);
    for (int q : quantize_int(d, p)) CHECK(q == 0);
  }
  SUBCASE("empty") {
    std::vector<double> d;
    CHECK_THROWS_WITH_AS(mmse_clip_threshold(d, Precision::Int4), "empty calibration data", std::invalid_argument);
  }
  SUBCASE("mixed vector against the exhaustive oracle") {
    std::vector<double> d{0.5, -0.5, 1.0, -1.0, 3.0};
    auto p = mmse_clip_threshold(d, Precision::Int4);
    CHECK(p.clip_threshold == oracle::mmse_threshold(d, 4));
    CHECK(clip_sse(d, p.clip_threshold, Precision::Int4) == oracle::clip_error(d, p.clip_threshold, 4));
  }
}

TEST_CASE("mmse threshold is optimal on the grid (random vectors)") {
  oracle::Gen g(101);
  for (int trial = 0; trial < 30; ++trial) {
    const int bits = (trial % 3 == 0) ? 2 : (trial % 3 == 1 ? 4 : 8);
    const Precision p = precision_from_bits(bits);
    auto d = g.vec(static_cast<std::size_t>(g.integer(1, 60)), -3.0, 3.0);
    auto params = mmse_clip_threshold(d, p);
    CHECK(params.clip_threshold == oracle::mmse_threshold(d, bits));
    const double best = clip_sse(d, params.clip_threshold, p);
    double m = 0.0;
    for (double x : d) m = std::max(m, std::fabs(x));
    for (int k = 1; k <= 1000; k += 37) CHECK(best <= clip_sse(d, m * k / 1000.0, p));
  }
}

TEST_CASE("integer quantization examples") {
  auto p = make_int_params(1.0, Precision::Int8);
  CHECK(p.scale == 127.0);
  std::vector<double> zeros(5, 0.0);
  for (int q : quantize_int(zeros, p)) CHECK(q == 0);
  std::vector<double> big{2.0, -2.0};
  CHECK(quantize_int(big, p) == std::vector<int>{127, -127});
  CHECK(quantize_int_scalar(0.26, p) == 33);
  CHECK_THROWS_AS(make_int_params(0.0, Precision::Int8), std::invalid_argument);
  CHECK_THROWS_AS(make_int_params(1.0, Precision::Fix16), std::invalid_argument);
}

TEST_CASE("integer quantization matches a scalar reference") {
  oracle::Gen g(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int bits = 2 << g.integer(0, 2);
    const double c = g.uniform(0.1, 4.0);
    const double x = g.uniform(-6.0, 6.0);
    auto p = make_int_params(c, precision_from_bits(bits));
    const double hi = std::pow(2.0, bits - 1) - 1.0;
    double v = std::clamp(x, -c, c);
    double expect = std::clamp(oracle::round_away(v * hi / c), -hi - 1.0, hi);
    CHECK(quantize_int_scalar(x, p) == static_cast<int>(expect));
  }
}

TEST_CASE("integer round trip within one level and symmetric") {
  oracle::Gen g(13);
  for (Precision prec : {Precision::Int2, Precision::Int4, Precision::Int8}) {
    for (int trial = 0; trial < 200; ++trial) {
      const double c = g.uniform(0.05, 5.0);
      auto p = make_int_params(c, prec);
      const double x = g.uniform(-c, c);
      std::vector<int> q{quantize_int_scalar(x, p)};
      double back = dequantize_int(q, p)[0];
      CHECK(std::fabs(x - back) <= c / max_level(prec) + 1e-12);
      CHECK(quantize_int_scalar(-x, p) == -quantize_int_scalar(x, p));
    }
  }
}

TEST_CASE("fixed16 format selection") {
  CHECK(fixed16_format_for_range(0.9) == FixedPointFormat{0, 15});
  CHECK(fixed16_format_for_range(5.7) == FixedPointFormat{3, 12});
  CHECK(fixed16_format_for_range(0.0) == FixedPointFormat{0, 15});
  CHECK(fixed16_format_for_range(1.0) == FixedPointFormat{0, 15});
  CHECK(fixed16_format_for_range(4.0) == FixedPointFormat{2, 13});
  std::vector<double> zeros(4, 0.0);
  CHECK(fixed16_format_for(zeros) == FixedPointFormat{0, 15});
  CHECK_THROWS_WITH(fixed16_format_for_range(32768.0), "range exceeds fixed-point capacity");
  CHECK_NOTHROW(fixed16_format_for_range(32767.0));
}

TEST_CASE("fixed16 quantization examples") {
  FixedPointFormat q15{0, 15};
  CHECK(quantize_fixed16_scalar(0.0, q15) == 0.0);
  CHECK(quantize_fixed16_scalar(0.9, q15) == 29491.0 / 32768.0);
  CHECK(quantize_fixed16_scalar(1.0, q15) == q15.max_value());
  CHECK(quantize_fixed16_scalar(-1.0, q15) == -1.0);
  CHECK(quantize_fixed16_scalar(-5.0, q15) == -1.0);
}

TEST_CASE("fixed16 round-trip error is at most half a step") {
  oracle::Gen g(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const double range = std::pow(2.0, g.uniform(-4.0, 14.0));
    auto fmt = fixed16_format_for_range(range);
    const double x = g.uniform(fmt.min_value(), fmt.max_value());
    CHECK(std::fabs(quantize_fixed16_scalar(x, fmt) - x) <= fmt.step() / 2);
  }
}

TEST_CASE("requantization") {
  FixedPointFormat q15{0, 15};
  std::vector<double> zeros(3, 0.0);
  for (double v : requantize_to_fixed16(zeros, RequantScale{3.0}, q15)) CHECK(v == 0.0);
  // 127/127 = 1.0 does not fit Q0.15 and saturates one step below.
  std::vector<double> one{127.0};
  CHECK(std::fabs(requantize_to_fixed16(one, RequantScale{127.0}, q15)[0] - 1.0) <= q15.step());
  std::vector<double> half{64.0};
  CHECK(requantize_to_fixed16(half, RequantScale{127.0}, q15)[0] ==
        oracle::round_away(64.0 / 127.0 * 32768.0) / 32768.0);
  CHECK_THROWS_AS(requantize_to_fixed16(one, RequantScale{0.0}, q15), std::invalid_argument);
  CHECK_THROWS_AS(requantize_to_fixed16(one, RequantScale{-1.0}, q15), std::invalid_argument);
}

TEST_CASE("quantization is deterministic") {
  oracle::Gen g(5);
  auto d = g.vec(100, -2.0, 2.0);
  auto a = mmse_clip_threshold(d, Precision::Int4);
  auto b = mmse_clip_threshold(d, Precision::Int4);
  CHECK(a.clip_threshold == b.clip_threshold);
  CHECK(quantize_int(d, a) == quantize_int(d, b));
  auto f = fixed16_format_for(d);
  CHECK(quantize_fixed16(d, f) == quantize_fixed16(d, f));
}
