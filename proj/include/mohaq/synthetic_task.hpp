#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mohaq/sru_net.hpp"

namespace mohaq {

// Frame-labelled sequence classification built from class-conditional noisy
// sinusoids. Each sequence holds two segments of different classes.
struct TaskConfig {
  std::uint64_t seed = 7;
  std::size_t seq_len = 20;
  std::size_t input_dim = 16;
  std::size_t classes = 8;
  std::size_t train_count = 1000;
  std::size_t validation_count = 200;
  std::size_t test_count = 200;
  double noise = 1.0;
};

struct LabeledSequence {
  Matrix features;          // seq_len x input_dim
  std::vector<int> labels;  // one per step
};

struct Dataset {
  std::vector<LabeledSequence> train;
  std::vector<LabeledSequence> validation;
  std::vector<LabeledSequence> test;
};

Dataset make_synthetic_task(const TaskConfig& cfg);

// Half of the sequences, stratified by the first-step label, in ascending index order.
std::vector<std::size_t> stratified_half(std::span<const LabeledSequence> data, std::uint64_t seed);

std::vector<Matrix> features_of(std::span<const LabeledSequence> data);

// Index of the largest score; ties resolve to the lowest index.
int argmax(std::span<const double> scores);

struct ErrorCount {
  std::size_t wrong = 0;
  std::size_t total = 0;
  double rate() const { return total ? static_cast<double>(wrong) / static_cast<double>(total) : 0.0; }
};

ErrorCount count_errors(const Matrix& scores, std::span<const int> labels);

}  // namespace mohaq
