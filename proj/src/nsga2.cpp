#include "mohaq/nsga2.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace mohaq {

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<Evaluation> Problem::evaluate_batch(std::span<const Genome> genomes, std::size_t jobs) const {
  std::vector<Evaluation> out(genomes.size());
  parallel_for(genomes.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = evaluate(genomes[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error("evaluating genome " + genome_to_string(genomes[i]) + ": " + e.what());
    }
  });
  return out;
}

void validate_ga_config(const GaConfig& cfg) {
  if (cfg.population_size < 2) throw std::invalid_argument("population_size must be at least 2");
  if (cfg.initial_population_size < cfg.population_size) {
    throw std::invalid_argument("initial_population_size must be at least population_size");
  }
  if (cfg.generations < 1) throw std::invalid_argument("generations must be at least 1");
  if (cfg.crossover_prob < 0.0 || cfg.crossover_prob > 1.0) {
    throw std::invalid_argument("crossover_prob must lie in [0, 1]");
  }
  if (cfg.mutation_prob && (*cfg.mutation_prob < 0.0 || *cfg.mutation_prob > 1.0)) {
    throw std::invalid_argument("mutation_prob must lie in [0, 1]");
  }
}

std::size_t evaluation_budget(const GaConfig& cfg) {
  return cfg.initial_population_size + (cfg.generations - 1) * cfg.population_size;
}

bool pareto_dominates(std::span<const double> a, std::span<const double> b) {
  bool strictly = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strictly = true;
  }
  return strictly;
}

bool constrained_dominates(const Evaluation& a, const Evaluation& b) {
  bool fa = a.violation <= 0.0, fb = b.violation <= 0.0;
  if (fa && !fb) return true;
  if (!fa && fb) return false;
  if (!fa && !fb) return a.violation < b.violation;
  return pareto_dominates(a.objectives, b.objectives);
}

std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const Evaluation> evals) {
  const std::size_t n = evals.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (constrained_dominates(evals[p], evals[q])) {
        dominated[p].push_back(q);
      } else if (constrained_dominates(evals[q], evals[p])) {
        ++count[p];
      }
    }
    if (count[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    fronts.push_back(current);
    std::vector<std::size_t> next;
    for (std::size_t p : current) {
      for (std::size_t q : dominated[p]) {
        if (--count[q] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    current = std::move(next);
  }
  return fronts;
}

std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const EvaluatedSolution> pop) {
  std::vector<Evaluation> evals;
  evals.reserve(pop.size());
  for (const auto& s : pop) evals.push_back(s.eval);
  return non_dominated_sort(evals);
}

std::vector<double> crowding_distance(std::span<const std::vector<double>> objectives) {
  const std::size_t n = objectives.size();
  std::vector<double> dist(n, 0.0);
  if (n == 0) return dist;
  if (n <= 2) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    return dist;
  }
  const std::size_t m = objectives[0].size();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < m; ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return objectives[a][k] < objectives[b][k]; });
    double lo = objectives[order.front()][k];
    double hi = objectives[order.back()][k];
    dist[order.front()] = std::numeric_limits<double>::infinity();
    dist[order.back()] = std::numeric_limits<double>::infinity();
    if (hi <= lo) continue;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      dist[order[i]] += (objectives[order[i + 1]][k] - objectives[order[i - 1]][k]) / (hi - lo);
    }
  }
  return dist;
}

namespace {

// Assigns rank and crowding to every member.
void rank_population(std::vector<EvaluatedSolution>& pop) {
  auto fronts = non_dominated_sort(std::span<const EvaluatedSolution>(pop));
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    std::vector<std::vector<double>> objs;
    for (std::size_t i : fronts[r]) objs.push_back(pop[i].eval.objectives);
    auto d = crowding_distance(objs);
    for (std::size_t j = 0; j < fronts[r].size(); ++j) {
      pop[fronts[r][j]].rank = r;
      pop[fronts[r][j]].crowding = d[j];
    }
  }
}

// (mu + lambda) survival: whole fronts first, then the most spread members of the split front.
std::vector<EvaluatedSolution> select_survivors(std::vector<EvaluatedSolution> pool, std::size_t n) {
  rank_population(pool);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pool[a].rank != pool[b].rank) return pool[a].rank < pool[b].rank;
    return pool[a].crowding > pool[b].crowding;
  });
  std::vector<EvaluatedSolution> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n && i < order.size(); ++i) out.push_back(pool[order[i]]);
  rank_population(out);
  return out;
}

class Breeder {
 public:
  Breeder(const Problem& problem, const GaConfig& cfg, std::mt19937_64& rng)
      : rng_(rng), crossover_prob_(cfg.crossover_prob) {
    const std::size_t len = problem.genome_length();
    for (std::size_t g = 0; g < len; ++g) {
      auto a = problem.alphabet(g);
      if (a.empty()) throw std::invalid_argument("gene " + std::to_string(g) + " has an empty alphabet");
      alphabets_.push_back(std::move(a));
    }
    mutation_prob_ = cfg.mutation_prob.value_or(1.0 / static_cast<double>(len));
  }

  Genome random_genome() {
    Genome g(alphabets_.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = pick(alphabets_[i]);
    return g;
  }

  const EvaluatedSolution& tournament(const std::vector<EvaluatedSolution>& pop) {
    std::uniform_int_distribution<std::size_t> d(0, pop.size() - 1);
    std::size_t a = d(rng_);
    std::size_t b = d(rng_);
    while (b == a) b = d(rng_);
    const auto& x = pop[a];
    const auto& y = pop[b];
    if (x.rank != y.rank) return x.rank < y.rank ? x : y;
    if (x.crowding != y.crowding) return x.crowding > y.crowding ? x : y;
    return coin() ? x : y;
  }

  std::pair<Genome, Genome> crossover(const Genome& p1, const Genome& p2) {
    Genome c1 = p1, c2 = p2;
    if (unit() < crossover_prob_) {
      for (std::size_t i = 0; i < c1.size(); ++i) {
        if (coin()) std::swap(c1[i], c2[i]);
      }
    }
    return {std::move(c1), std::move(c2)};
  }

  void mutate(Genome& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (alphabets_[i].size() < 2 || !(unit() < mutation_prob_)) continue;
      std::vector<int> others;
      for (int v : alphabets_[i])
        if (v != g[i]) others.push_back(v);
      g[i] = pick(others);
    }
  }

 private:
  int pick(const std::vector<int>& values) {
    std::uniform_int_distribution<std::size_t> d(0, values.size() - 1);
    return values[d(rng_)];
  }
  bool coin() { return std::uniform_int_distribution<int>(0, 1)(rng_) == 1; }
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  std::mt19937_64& rng_;
  std::vector<std::vector<int>> alphabets_;
  double crossover_prob_;
  double mutation_prob_ = 0.0;
};

void check_evaluation(const Problem& problem, const Genome& g, const Evaluation& e) {
  if (e.objectives.size() != problem.objective_count()) {
    throw std::runtime_error("evaluating genome " + genome_to_string(g) + ": expected " +
                             std::to_string(problem.objective_count()) + " objectives, got " +
                             std::to_string(e.objectives.size()));
  }
  for (double v : e.objectives) {
    if (std::isnan(v)) throw std::runtime_error("evaluating genome " + genome_to_string(g) + ": NaN objective");
  }
  if (!(e.violation >= 0.0)) {
    throw std::runtime_error("evaluating genome " + genome_to_string(g) + ": negative or NaN violation");
  }
}

}  // namespace

EvolveResult evolve(const Problem& problem, const GaConfig& cfg, const GenerationCallback& on_generation) {
  validate_ga_config(cfg);
  if (problem.genome_length() == 0) throw std::invalid_argument("genome length must be positive");
  if (problem.objective_count() == 0) throw std::invalid_argument("problem has no objectives");

  std::mt19937_64 rng(cfg.seed);
  Breeder breeder(problem, cfg, rng);
  std::map<Genome, Evaluation> seen;
  EvolveResult result;
  std::vector<EvaluatedSolution> archive;

  // Evaluates a batch; genomes seen before reuse their stored result.
  auto evaluate_generation = [&](std::size_t generation, const std::vector<Genome>& batch) {
    std::vector<Genome> fresh;
    std::set<Genome> fresh_set;
    for (const auto& g : batch) {
      if (!seen.contains(g) && fresh_set.insert(g).second) fresh.push_back(g);
    }
    auto evals = problem.evaluate_batch(fresh, cfg.jobs);
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      check_evaluation(problem, fresh[i], evals[i]);
      seen.emplace(fresh[i], evals[i]);
      archive.push_back({fresh[i], evals[i], 0, 0.0});
    }
    std::vector<EvaluatedSolution> out;
    std::set<Genome> logged;
    for (const auto& g : batch) {
      const Evaluation& e = seen.at(g);
      bool cached = !fresh_set.contains(g) || !logged.insert(g).second;
      result.log.push_back({generation, g, e, cached});
      out.push_back({g, e, 0, 0.0});
    }
    return out;
  };

  // Prefers genomes not yet evaluated; gives up after a bounded number of draws.
  auto novel = [&](const Genome& g, const std::set<Genome>& batch) {
    return !seen.contains(g) && !batch.contains(g);
  };

  std::vector<Genome> initial;
  std::set<Genome> initial_set;
  for (std::size_t i = 0; i < cfg.initial_population_size; ++i) {
    Genome g = breeder.random_genome();
    for (std::size_t t = 0; t < cfg.duplicate_retries && !novel(g, initial_set); ++t) g = breeder.random_genome();
    initial_set.insert(g);
    initial.push_back(std::move(g));
  }
  auto population = select_survivors(evaluate_generation(1, initial), cfg.population_size);
  if (on_generation) on_generation(1, population);

  for (std::size_t gen = 2; gen <= cfg.generations; ++gen) {
    std::vector<Genome> offspring;
    std::set<Genome> batch_set;
    std::size_t repeats = 0;
    while (offspring.size() < cfg.population_size) {
      const auto& p1 = breeder.tournament(population);
      const auto& p2 = breeder.tournament(population);
      auto [c1, c2] = breeder.crossover(p1.genome, p2.genome);
      breeder.mutate(c1);
      breeder.mutate(c2);
      for (Genome* k : {&c1, &c2}) {
        if (offspring.size() >= cfg.population_size) break;
        if (novel(*k, batch_set) || repeats >= cfg.duplicate_retries) {
          batch_set.insert(*k);
          offspring.push_back(std::move(*k));
        } else {
          ++repeats;
        }
      }
    }
    auto children = evaluate_generation(gen, offspring);
    std::vector<EvaluatedSolution> pool = population;
    pool.insert(pool.end(), children.begin(), children.end());
    population = select_survivors(std::move(pool), cfg.population_size);
    if (on_generation) on_generation(gen, population);
  }

  result.pareto = feasible_front(archive);
  result.population = std::move(population);
  return result;
}

std::vector<EvaluatedSolution> feasible_front(std::span<const EvaluatedSolution> solutions) {
  std::map<Genome, const EvaluatedSolution*> unique;
  for (const auto& s : solutions) {
    if (s.feasible()) unique.emplace(s.genome, &s);
  }
  std::vector<EvaluatedSolution> feasible;
  for (const auto& [_, s] : unique) feasible.push_back(*s);
  std::vector<EvaluatedSolution> front;
  for (std::size_t i = 0; i < feasible.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < feasible.size() && !dominated; ++j) {
      dominated = j != i && pareto_dominates(feasible[j].eval.objectives, feasible[i].eval.objectives);
    }
    if (!dominated) front.push_back(feasible[i]);
  }
  std::vector<std::vector<double>> objs;
  for (const auto& s : front) objs.push_back(s.eval.objectives);
  auto d = crowding_distance(objs);
  for (std::size_t i = 0; i < front.size(); ++i) {
    front[i].rank = 0;
    front[i].crowding = d[i];
  }
  std::stable_sort(front.begin(), front.end(), [](const EvaluatedSolution& a, const EvaluatedSolution& b) {
    if (a.eval.objectives[0] != b.eval.objectives[0]) return a.eval.objectives[0] < b.eval.objectives[0];
    return a.genome < b.genome;
  });
  return front;
}

void write_eval_log(std::ostream& out, std::span<const EvalRecord> log) {
  for (const auto& r : log) {
    nlohmann::json j;
    j["generation"] = r.generation;
    j["genome"] = r.genome;
    j["objectives"] = r.eval.objectives;
    j["violation"] = r.eval.violation;
    if (!r.eval.tag.empty()) j["tag"] = r.eval.tag;
    if (r.cached) j["cached"] = true;
    out << j.dump() << '\n';
  }
}

std::vector<EvalRecord> read_eval_log(std::istream& in) {
  std::vector<EvalRecord> log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      EvalRecord r;
      r.generation = j.at("generation").get<std::size_t>();
      r.genome = j.at("genome").get<Genome>();
      r.eval.objectives = j.at("objectives").get<std::vector<double>>();
      r.eval.violation = j.at("violation").get<double>();
      r.eval.tag = j.value("tag", "");
      r.cached = j.value("cached", false);
      log.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("evaluation log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace mohaq
