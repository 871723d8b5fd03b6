#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mohaq/genome.hpp"

namespace mohaq {

// All objectives are minimized; violation 0 means feasible.
struct Evaluation {
  std::vector<double> objectives;
  double violation = 0.0;
  std::string tag;  // free-form note carried into the log (e.g. which parameters won)
};

struct EvaluatedSolution {
  Genome genome;
  Evaluation eval;
  std::size_t rank = 0;
  double crowding = 0.0;

  bool feasible() const { return eval.violation <= 0.0; }
};

class Problem {
 public:
  virtual ~Problem() = default;
  virtual std::size_t genome_length() const = 0;
  virtual std::vector<int> alphabet(std::size_t gene) const = 0;
  virtual std::size_t objective_count() const = 0;
  // Must be safe to call concurrently.
  virtual Evaluation evaluate(const Genome& genome) const = 0;
  // Results are returned in input order regardless of `jobs`.
  virtual std::vector<Evaluation> evaluate_batch(std::span<const Genome> genomes, std::size_t jobs) const;
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct GaConfig {
  std::size_t population_size = 10;
  std::size_t initial_population_size = 40;
  std::size_t generations = 15;  // the initial population counts as generation 1
  double crossover_prob = 0.9;
  std::optional<double> mutation_prob;  // default 1 / genome_length
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::size_t duplicate_retries = 50;
};

void validate_ga_config(const GaConfig& cfg);

// Number of evaluations evolve performs.
std::size_t evaluation_budget(const GaConfig& cfg);

// Deb's rule: feasible beats infeasible, smaller violation beats larger, else Pareto.
bool constrained_dominates(const Evaluation& a, const Evaluation& b);
bool pareto_dominates(std::span<const double> a, std::span<const double> b);

std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const Evaluation> evals);
std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const EvaluatedSolution> pop);

// Per member of one front: boundary points are +inf, interior points sum normalized gaps.
std::vector<double> crowding_distance(std::span<const std::vector<double>> objectives);

struct EvalRecord {
  std::size_t generation = 0;  // 1-based
  Genome genome;
  Evaluation eval;
  bool cached = false;  // repeated genome; the earlier result was reused
};

struct EvolveResult {
  std::vector<EvaluatedSolution> pareto;      // non-dominated feasible set over every evaluation
  std::vector<EvaluatedSolution> population;  // final survivors
  std::vector<EvalRecord> log;
};

using GenerationCallback = std::function<void(std::size_t generation,
                                              std::span<const EvaluatedSolution> population)>;

EvolveResult evolve(const Problem& problem, const GaConfig& cfg,
                    const GenerationCallback& on_generation = {});

// Non-dominated feasible members with unique genomes, ordered by first objective then genome.
std::vector<EvaluatedSolution> feasible_front(std::span<const EvaluatedSolution> solutions);

// One JSON object per line: generation, genome, objectives, violation (+ tag, cached).
void write_eval_log(std::ostream& out, std::span<const EvalRecord> log);
std::vector<EvalRecord> read_eval_log(std::istream& in);

}  // namespace mohaq
