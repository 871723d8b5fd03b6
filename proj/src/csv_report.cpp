#include "mohaq/csv_report.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace mohaq {

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

double parse_number_exact(const std::string& text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw std::invalid_argument("'" + text + "' is not a number");
  }
  return v;
}

CsvRow to_csv_row(const ParetoRecord& record, std::size_t index) {
  CsvRow row;
  row.solution = "S" + std::to_string(index + 1);
  row.genome = genome_to_string(record.genome);
  row.wer_v = format_number(record.validation_error);
  row.wer_t = format_number(record.test_error);
  row.cp_r = format_number(record.compression_ratio);
  row.speedup = format_number(record.speedup);
  row.energy_j = record.energy_j ? format_number(*record.energy_j) : "";
  row.beacon = record.beacon_used;
  return row;
}

std::string format_csv_row(const CsvRow& r) {
  return r.solution + ',' + r.genome + ',' + r.wer_v + ',' + r.wer_t + ',' + r.cp_r + ',' + r.speedup + ',' +
         r.energy_j + ',' + r.beacon;
}

void write_pareto_csv(std::ostream& out, std::span<const ParetoRecord> records) {
  out << kParetoHeader << '\n';
  for (std::size_t i = 0; i < records.size(); ++i) out << format_csv_row(to_csv_row(records[i], i)) << '\n';
}

std::vector<CsvRow> read_pareto_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("pareto csv: empty file");
  if (line != kParetoHeader) throw std::runtime_error("pareto csv line 1: unexpected header '" + line + "'");
  std::vector<CsvRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 8) {
      throw std::runtime_error("pareto csv line " + std::to_string(line_no) + ": expected 8 fields, got " +
                               std::to_string(fields.size()));
    }
    rows.push_back({fields[0], fields[1], fields[2], fields[3], fields[4], fields[5], fields[6], fields[7]});
  }
  return rows;
}

Genome parse_genome(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty genome");
  Genome g;
  for (char c : text) {
    if (c < '1' || c > '4') throw std::invalid_argument("genome '" + text + "' has a gene outside {1,2,3,4}");
    g.push_back(c - '0');
  }
  return g;
}

}  // namespace mohaq
