#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mohaq/nsga2.hpp"
#include "oracles.hpp"
#include "toy_problems.hpp"

using namespace mohaq;

namespace {

using toy::ToyProblem;
using toy::tradeoff_problem;
using toy::uniform_alphabets;

void check_front_subset(const ToyProblem& p, const GaConfig& cfg) {
  auto exact = oracle::exhaustive_front(p.alphabets(), p.fn());
  std::set<std::vector<int>> exact_set(exact.begin(), exact.end());
  auto r = evolve(p, cfg);
  REQUIRE_FALSE(r.pareto.empty());
  for (const auto& s : r.pareto) {
    CHECK(exact_set.contains(s.genome));
    CHECK(s.feasible());
  }
}

}  // namespace

TEST_CASE("dominance relations") {
  std::vector<double> a{1, 2}, b{2, 2}, c{0, 3};
  CHECK(pareto_dominates(a, b));
  CHECK_FALSE(pareto_dominates(b, a));
  CHECK_FALSE(pareto_dominates(a, a));
  CHECK_FALSE(pareto_dominates(a, c));
  CHECK_FALSE(pareto_dominates(c, a));
  Evaluation feas{{5, 5}, 0, ""}, small{{0, 0}, 0.1, ""}, big{{0, 0}, 0.5, ""};
  CHECK(constrained_dominates(feas, small));
  CHECK_FALSE(constrained_dominates(small, feas));
  CHECK(constrained_dominates(small, big));
  CHECK_FALSE(constrained_dominates(big, small));
}

TEST_CASE("non-dominated sort matches the peeling oracle") {
  oracle::Gen g(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = static_cast<std::size_t>(g.integer(1, 40));
    const std::size_t m = static_cast<std::size_t>(g.integer(1, 4));
    std::vector<Evaluation> evals;
    std::vector<std::vector<double>> objs;
    std::vector<double> viol;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> o;
      // Coarse values produce ties and duplicates.
      for (std::size_t k = 0; k < m; ++k) o.push_back(static_cast<double>(g.integer(0, 5)));
      double v = g.integer(0, 3) == 0 ? static_cast<double>(g.integer(1, 3)) : 0.0;
      evals.push_back({o, v, ""});
      objs.push_back(o);
      viol.push_back(v);
    }
    auto fronts = non_dominated_sort(evals);
    auto ranks = oracle::peel_ranks(objs, viol);
    std::vector<std::size_t> got(n, SIZE_MAX);
    std::size_t covered = 0;
    for (std::size_t f = 0; f < fronts.size(); ++f) {
      for (std::size_t i : fronts[f]) got[i] = f;
      covered += fronts[f].size();
    }
    CHECK(covered == n);
    CHECK(got == ranks);
  }
}

TEST_CASE("crowding distance") {
  SUBCASE("three collinear points") {
    std::vector<std::vector<double>> pts{{0, 2}, {1, 1}, {2, 0}};
    auto d = crowding_distance(pts);
    CHECK(std::isinf(d[0]));
    CHECK(std::isinf(d[2]));
    CHECK(d[1] == doctest::Approx(2.0));
  }
  SUBCASE("two or fewer points are all boundary") {
    std::vector<std::vector<double>> two{{0, 1}, {1, 0}};
    for (double v : crowding_distance(two)) CHECK(std::isinf(v));
    std::vector<std::vector<double>> one{{0, 1}};
    CHECK(std::isinf(crowding_distance(one)[0]));
  }
  SUBCASE("constant objective contributes nothing") {
    std::vector<std::vector<double>> pts{{0, 5}, {1, 5}, {3, 5}, {4, 5}};
    auto d = crowding_distance(pts);
    CHECK(d[1] == doctest::Approx(3.0 / 4.0));
    CHECK(d[2] == doctest::Approx(3.0 / 4.0));
  }
}

TEST_CASE("evaluation budget") {
  GaConfig cfg;
  cfg.generations = 60;
  CHECK(evaluation_budget(cfg) == 630);
  cfg.generations = 15;
  CHECK(evaluation_budget(cfg) == 180);
  cfg.generations = 1;
  CHECK(evaluation_budget(cfg) == 40);
  auto p = tradeoff_problem(6);
  for (std::size_t gens : {15u, 60u}) {
    cfg.generations = gens;
    auto r = evolve(p, cfg);
    CHECK(r.log.size() == evaluation_budget(cfg));
  }
}

TEST_CASE("invalid configuration") {
  GaConfig cfg;
  cfg.population_size = 0;
  CHECK_THROWS_AS(validate_ga_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.initial_population_size = 5;
  CHECK_THROWS_AS(validate_ga_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.crossover_prob = 1.5;
  CHECK_THROWS_AS(validate_ga_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.generations = 0;
  CHECK_THROWS_AS(validate_ga_config(cfg), std::invalid_argument);
}

TEST_CASE("returned front is a subset of the exhaustive front") {
  SUBCASE("one gene, four points") {
    ToyProblem p({{1, 2, 3, 4}}, 2, [](const std::vector<int>& g) {
      return std::pair{std::vector<double>{static_cast<double>(g[0]), static_cast<double>(5 - g[0])}, 0.0};
    });
    CHECK(evolve(p, GaConfig{}).pareto.size() == 4);
    check_front_subset(p, GaConfig{});
  }
  SUBCASE("four genes, six genes (4096 points) and ten binary genes") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      CAPTURE(seed);
      check_front_subset(tradeoff_problem(4), toy::oracle_ga(seed));
      check_front_subset(tradeoff_problem(6), toy::oracle_ga(seed));
      check_front_subset(toy::binary_problem(), toy::oracle_ga(seed));
    }
  }
}

TEST_CASE("constant objectives keep one representative per genome") {
  ToyProblem p(uniform_alphabets(3, {1, 2}), 2, [](const std::vector<int>&) {
    return std::pair{std::vector<double>{1.0, 1.0}, 0.0};
  });
  GaConfig cfg;
  cfg.generations = 5;
  auto r = evolve(p, cfg);
  // Every evaluated genome is non-dominated; the front lists each once.
  std::set<Genome> unique;
  for (const auto& s : r.pareto) CHECK(unique.insert(s.genome).second);
  CHECK(unique.size() == 8);
}

TEST_CASE("infeasible everywhere gives an empty front") {
  ToyProblem p(uniform_alphabets(3, {1, 2, 3}), 1, [](const std::vector<int>& g) {
    return std::pair{std::vector<double>{static_cast<double>(g[0])}, 1.0 + g[1]};
  });
  GaConfig cfg;
  cfg.generations = 4;
  auto r = evolve(p, cfg);
  CHECK(r.pareto.empty());
  CHECK(r.population.size() == cfg.population_size);
}

TEST_CASE("seeded runs are deterministic and respect the alphabet") {
  auto p = tradeoff_problem(5);
  GaConfig cfg;
  cfg.generations = 8;
  cfg.seed = 42;
  auto a = evolve(p, cfg);
  cfg.jobs = 4;
  auto b = evolve(p, cfg);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].genome == b.log[i].genome);
    CHECK(a.log[i].eval.objectives == b.log[i].eval.objectives);
    for (int gene : a.log[i].genome) CHECK((gene >= 1 && gene <= 4));
  }
  cfg.seed = 43;
  auto c = evolve(p, cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.log.size(); ++i) differs |= a.log[i].genome != c.log[i].genome;
  CHECK(differs);
}

TEST_CASE("elitism: the best feasible value never gets worse") {
  auto p = tradeoff_problem(6);
  GaConfig cfg;
  cfg.generations = 30;
  double best = INFINITY;
  std::size_t calls = 0;
  evolve(p, cfg, [&](std::size_t gen, std::span<const EvaluatedSolution> pop) {
    CHECK(gen == ++calls);
    CHECK(pop.size() == cfg.population_size);
    double now = INFINITY;
    for (const auto& s : pop)
      if (s.feasible()) now = std::min(now, s.eval.objectives[0]);
    CHECK(now <= best);
    best = now;
  });
  CHECK(calls == 30);
}

TEST_CASE("duplicates are logged as cached and never re-evaluated") {
  // Only eight distinct genomes exist; later generations must repeat them.
  std::atomic<int> calls{0};
  ToyProblem p(uniform_alphabets(3, {1, 2}), 2, [&](const std::vector<int>& g) {
    ++calls;
    return std::pair{std::vector<double>{static_cast<double>(g[0] + g[1]), static_cast<double>(g[2] - g[0])}, 0.0};
  });
  GaConfig cfg;
  cfg.generations = 6;
  cfg.duplicate_retries = 5;
  auto r = evolve(p, cfg);
  CHECK(calls.load() == 8);
  std::size_t fresh = 0;
  for (const auto& e : r.log) fresh += !e.cached;
  CHECK(fresh == 8);
  CHECK(r.log.size() == evaluation_budget(cfg));
}

TEST_CASE("evaluation log round trip") {
  std::vector<EvalRecord> log{{1, {1, 2, 3}, {{0.25, -3.5}, 0.0, ""}, false},
                              {2, {4, 4, 1}, {{0.1, 1e-17}, 0.75, "general"}, true}};
  std::stringstream ss;
  write_eval_log(ss, log);
  auto back = read_eval_log(ss);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].generation == log[i].generation);
    CHECK(back[i].genome == log[i].genome);
    CHECK(back[i].eval.objectives == log[i].eval.objectives);
    CHECK(back[i].eval.violation == log[i].eval.violation);
    CHECK(back[i].eval.tag == log[i].eval.tag);
    CHECK(back[i].cached == log[i].cached);
  }
  std::stringstream bad("{\"generation\": 1}\n");
  CHECK_THROWS(read_eval_log(bad));
}

TEST_CASE("evaluation errors name the genome") {
  ToyProblem p(uniform_alphabets(2, {1, 2}), 1, [](const std::vector<int>& g) -> std::pair<std::vector<double>, double> {
    if (g[0] == 2) throw std::runtime_error("boom");
    return {{1.0}, 0.0};
  });
  std::vector<Genome> batch{{1, 1}, {2, 1}};
  CHECK_THROWS_WITH(p.evaluate_batch(batch, 2), doctest::Contains("21"));
}
