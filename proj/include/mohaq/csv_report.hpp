#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mohaq/search.hpp"

namespace mohaq {

inline constexpr const char* kParetoHeader = "solution,genome,wer_v,wer_t,cp_r,speedup,energy_J,beacon";

// Shortest decimal text that parses back to the same double.
std::string format_number(double v);
double parse_number_exact(const std::string& text);

struct CsvRow {
  std::string solution;
  std::string genome;
  std::string wer_v;
  std::string wer_t;
  std::string cp_r;
  std::string speedup;
  std::string energy_j;  // empty when the profile has no energy table
  std::string beacon;    // empty when the baseline parameters won
  bool operator==(const CsvRow&) const = default;
};

CsvRow to_csv_row(const ParetoRecord& record, std::size_t index);
std::string format_csv_row(const CsvRow& row);

void write_pareto_csv(std::ostream& out, std::span<const ParetoRecord> records);
// Throws std::runtime_error naming the line on malformed input.
std::vector<CsvRow> read_pareto_csv(std::istream& in);

Genome parse_genome(const std::string& text);

}  // namespace mohaq
