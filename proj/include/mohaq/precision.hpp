#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mohaq {

// The atom of the search space. Genes carry the encoded value (1..4).
enum class Precision : std::uint8_t { Int2 = 1, Int4 = 2, Int8 = 3, Fix16 = 4 };

inline constexpr std::array<Precision, 4> kAllPrecisions = {Precision::Int2, Precision::Int4,
                                                            Precision::Int8, Precision::Fix16};

constexpr int bit_width(Precision p) {
  switch (p) {
    case Precision::Int2: return 2;
    case Precision::Int4: return 4;
    case Precision::Int8: return 8;
    case Precision::Fix16: return 16;
  }
  return 16;
}

constexpr int encoded(Precision p) { return static_cast<int>(p); }

constexpr bool is_integer(Precision p) { return p != Precision::Fix16; }

// Largest positive integer level: 1, 7, 127. Undefined for Fix16.
constexpr int max_level(Precision p) { return (1 << (bit_width(p) - 1)) - 1; }

// Most negative integer level: -2, -8, -128.
constexpr int min_level(Precision p) { return -(1 << (bit_width(p) - 1)); }

inline Precision precision_from_code(int code) {
  if (code < 1 || code > 4) {
    throw std::invalid_argument("gene " + std::to_string(code) + " outside alphabet {1,2,3,4}");
  }
  return static_cast<Precision>(code);
}

inline Precision precision_from_bits(int bits) {
  switch (bits) {
    case 2: return Precision::Int2;
    case 4: return Precision::Int4;
    case 8: return Precision::Int8;
    case 16: return Precision::Fix16;
    default: throw std::invalid_argument("unsupported bit width " + std::to_string(bits));
  }
}

inline std::string to_string(Precision p) {
  switch (p) {
    case Precision::Int2: return "INT2";
    case Precision::Int4: return "INT4";
    case Precision::Int8: return "INT8";
    case Precision::Fix16: return "FIX16";
  }
  return "?";
}

}  // namespace mohaq
