#include "mohaq/synthetic_task.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mohaq {

namespace {

struct ClassPattern {
  std::vector<double> frequency, phase, amplitude;
};

LabeledSequence draw_sequence(const TaskConfig& cfg, const std::vector<ClassPattern>& patterns,
                              std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> cls(0, cfg.classes - 1);
  std::uniform_int_distribution<std::size_t> other(1, cfg.classes - 1);
  const std::size_t lo = cfg.seq_len / 4;
  const std::size_t hi = std::max(lo, (3 * cfg.seq_len) / 4);
  std::uniform_int_distribution<std::size_t> cut(lo, hi);
  std::uniform_real_distribution<double> jitter(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, cfg.noise);

  const std::size_t first = cls(rng);
  const std::size_t second = cfg.classes > 1 ? (first + other(rng)) % cfg.classes : first;
  const std::size_t boundary = cut(rng);
  const double shift = jitter(rng);

  LabeledSequence seq{Matrix(cfg.seq_len, cfg.input_dim), std::vector<int>(cfg.seq_len)};
  for (std::size_t t = 0; t < cfg.seq_len; ++t) {
    const std::size_t c = t < boundary ? first : second;
    seq.labels[t] = static_cast<int>(c);
    const auto& p = patterns[c];
    for (std::size_t d = 0; d < cfg.input_dim; ++d) {
      const double clean = p.amplitude[d] * std::sin(p.frequency[d] * static_cast<double>(t) + p.phase[d] + shift);
      seq.features(t, d) = clean + noise(rng);
    }
  }
  return seq;
}

}  // namespace

Dataset make_synthetic_task(const TaskConfig& cfg) {
  if (cfg.seq_len == 0 || cfg.input_dim == 0 || cfg.classes == 0) {
    throw std::invalid_argument("task dimensions must be positive");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> freq(0.2, 1.2);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::vector<ClassPattern> patterns(cfg.classes);
  for (auto& p : patterns) {
    for (std::size_t d = 0; d < cfg.input_dim; ++d) {
      p.frequency.push_back(freq(rng));
      p.phase.push_back(phase(rng));
      p.amplitude.push_back(amp(rng));
    }
  }
  Dataset ds;
  for (std::size_t i = 0; i < cfg.train_count; ++i) ds.train.push_back(draw_sequence(cfg, patterns, rng));
  for (std::size_t i = 0; i < cfg.validation_count; ++i) ds.validation.push_back(draw_sequence(cfg, patterns, rng));
  for (std::size_t i = 0; i < cfg.test_count; ++i) ds.test.push_back(draw_sequence(cfg, patterns, rng));
  return ds;
}

std::vector<std::size_t> stratified_half(std::span<const LabeledSequence> data, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) groups[data[i].labels.at(0)].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picked;
  for (auto& [label, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t take = (idx.size() + 1) / 2;
    picked.insert(picked.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<Matrix> features_of(std::span<const LabeledSequence> data) {
  std::vector<Matrix> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(s.features);
  return out;
}

int argmax(std::span<const double> scores) {
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

ErrorCount count_errors(const Matrix& scores, std::span<const int> labels) {
  if (scores.rows != labels.size()) throw std::invalid_argument("score/label length mismatch");
  ErrorCount e;
  for (std::size_t t = 0; t < scores.rows; ++t) {
    if (argmax(scores.row(t)) != labels[t]) ++e.wrong;
    ++e.total;
  }
  return e;
}

}  // namespace mohaq
