#pragma once

#include <string>
#include <vector>

namespace mohaq {

// GA individual: encoded precision choices (1..4).
using Genome = std::vector<int>;

inline std::string genome_to_string(const Genome& g) {
  std::string s;
  for (int v : g) s += std::to_string(v);
  return s;
}

}  // namespace mohaq
