#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "mlgibbs/mt.hpp"
#include "test_helpers.hpp"

using namespace mlgibbs;
using testutil::random_distribution;
using testutil::random_joint;

namespace {

MtProblem random_problem(std::vector<std::size_t> sizes, std::vector<double> coeffs, Rng& rng) {
  std::vector<FiniteJoint> priors;
  for (std::size_t i = 1; i <= sizes.size(); ++i)
    priors.push_back(random_joint({sizes.begin(), sizes.begin() + static_cast<std::ptrdiff_t>(i)}, rng));
  return MtProblem(std::move(priors), TemperatureVector(std::move(coeffs)));
}

// exhaustive composition enumeration; the reference for the grid oracle
double enumerate_grid_minimum(const MtProblem& problem, int grid) {
  const std::size_t cells = problem.priors.back().cell_count();
  std::vector<int> counts(cells, 0);
  double best = kInfinity;
  std::function<void(std::size_t, int)> rec = [&](std::size_t cell, int remaining) {
    if (cell + 1 == cells) {
      counts[cell] = remaining;
      std::vector<double> p(cells);
      for (std::size_t i = 0; i < cells; ++i)
        p[i] = static_cast<double>(counts[i]) / static_cast<double>(grid);
      const double value = mt_objective(FiniteJoint(problem.axis_sizes(), p), problem);
      if (value < best) best = value;
      return;
    }
    for (int t = 0; t <= remaining; ++t) {
      counts[cell] = t;
      rec(cell + 1, remaining - t);
    }
  };
  rec(0, grid);
  return best;
}

// direct evaluation of the consistent-product-prior twisted posterior
FiniteJoint product_prior_twisted(const FiniteDistribution& q1, const FiniteDistribution& q2,
                                  const std::vector<double>& risk, double a1, double a2) {
  const std::size_t n1 = q1.size(), n2 = q2.size();
  std::vector<double> inner(n1, 0.0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) inner[i] += std::exp(-risk[i * n2 + j] / a2) * q2[j];
  std::vector<double> first(n1);
  for (std::size_t i = 0; i < n1; ++i) first[i] = std::pow(inner[i], a2 / (a1 + a2)) * q1[i];
  double z = 0.0;
  for (double f : first) z += f;
  std::vector<double> cells(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      cells[i * n2 + j] =
          first[i] / z * std::exp(-risk[i * n2 + j] / a2) * q2[j] / inner[i];
  return FiniteJoint({n1, n2}, cells);
}

// direct evaluation of the general-prior two-level twisted posterior
FiniteJoint general_prior_twisted(const FiniteDistribution& q1, const FiniteJoint& q2,
                                  const std::vector<double>& risk, double a1, double a2) {
  const std::size_t n1 = q1.size(), n2 = q2.axis_sizes()[1];
  std::vector<double> inner(n1, 0.0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      inner[i] += std::exp(-risk[i * n2 + j] / a2) * q2[i * n2 + j];
  std::vector<double> first(n1);
  for (std::size_t i = 0; i < n1; ++i)
    first[i] = std::pow(inner[i], a2 / (a1 + a2)) * std::pow(q1[i], a1 / (a1 + a2));
  double z = 0.0;
  for (double f : first) z += f;
  std::vector<double> cells(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      cells[i * n2 + j] =
          first[i] / z * std::exp(-risk[i * n2 + j] / a2) * q2[i * n2 + j] / inner[i];
  return FiniteJoint({n1, n2}, cells);
}

}  // namespace

TEST_CASE("MtProblem validation") {
  Rng rng(21, 0);
  auto r2 = random_joint({2, 2}, rng);
  REQUIRE_THROWS_AS(MtProblem({r2}, TemperatureVector({1.0})), DimensionError);
  REQUIRE_THROWS_AS(MtProblem({random_joint({3}, rng), r2}, TemperatureVector({1.0, 1.0})),
                    DimensionError);
  REQUIRE_THROWS_AS(MtProblem({random_joint({2}, rng), r2}, TemperatureVector({1.0})),
                    DimensionError);
  REQUIRE_NOTHROW(MtProblem({random_joint({2}, rng), r2}, TemperatureVector({1.0, 1.0})));
}

TEST_CASE("mt_solve") {
  Rng rng(22, 0);

  SECTION("depth one returns the prior unchanged") {
    auto prior = random_joint({4}, rng);
    auto sol = mt_solve(MtProblem({prior}, TemperatureVector({1.7})));
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(std::abs(sol.joint[i] - prior[i]) < 1e-15);
    REQUIRE(sol.renyi_residue == 0.0);
    REQUIRE(std::abs(sol.objective) < 1e-12);
  }

  SECTION("consistent priors collapse to the deepest prior") {
    auto r2 = random_joint({2, 3}, rng);
    auto sol = mt_solve(MtProblem({marginalize(r2, 1), r2}, TemperatureVector({0.7, 1.3})));
    for (std::size_t c = 0; c < r2.cell_count(); ++c)
      REQUIRE(std::abs(sol.joint[c] - r2[c]) < 1e-14);
    REQUIRE(std::abs(sol.objective) < 1e-12);
  }

  SECTION("two-level solution has the tilted marginal and the deep conditional") {
    for (int trial = 0; trial < 50; ++trial) {
      auto q1 = FiniteDistribution::uniform(2);
      auto r2 = random_joint({2, 2}, rng);
      const double a1 = 0.2 + rng.uniform(), a2 = 0.2 + rng.uniform();
      auto sol = mt_solve(
          MtProblem({FiniteJoint::from_distribution(q1), r2}, TemperatureVector({a1, a2})));
      auto expected_marginal = tilt(q1, marginalize(r2, 1).flatten(), a1 / (a1 + a2));
      auto got_marginal = marginalize(sol.joint, 1);
      auto deep = chain_factorize(r2)[1];
      auto got_cond = chain_factorize(sol.joint)[1];
      for (std::size_t x = 0; x < 2; ++x) {
        REQUIRE(std::abs(got_marginal[x] - expected_marginal[x]) < 1e-12);
        for (std::size_t y = 0; y < 2; ++y)
          REQUIRE(std::abs(got_cond.at(x, y) - deep.at(x, y)) < 1e-12);
      }
    }
  }

  SECTION("joint equals the recomposition of the returned factors") {
    auto problem = random_problem({2, 3, 2}, {0.5, 1.0, 2.0}, rng);
    auto sol = mt_solve(problem);
    auto back = recompose(sol.factors);
    for (std::size_t c = 0; c < sol.joint.cell_count(); ++c)
      REQUIRE(std::abs(sol.joint[c] - back[c]) < 1e-12);
  }

  SECTION("certified minimum equals the evaluated objective") {
    for (int trial = 0; trial < 200; ++trial) {
      auto problem = random_problem({2, 2, 2}, {0.3 + rng.uniform(), 0.3 + rng.uniform(), 0.3 + rng.uniform()}, rng);
      auto sol = mt_solve(problem);
      REQUIRE(std::abs(sol.objective - sol.renyi_residue) < 1e-9);
    }
  }

  SECTION("mutually singular tilt is reported") {
    FiniteJoint r1({2}, {1.0, 0.0});
    FiniteJoint r2({2, 2}, {0.0, 0.0, 0.5, 0.5});
    REQUIRE_THROWS_AS(mt_solve(MtProblem({r1, r2}, TemperatureVector({1.0, 1.0}))),
                      SingularTiltError);
  }
}

TEST_CASE("mt_objective") {
  Rng rng(23, 0);

  SECTION("consistent candidate against its own marginals scores zero") {
    auto q = random_joint({2, 2}, rng);
    MtProblem problem({marginalize(q, 1), q}, TemperatureVector({1.0, 1.0}));
    REQUIRE(std::abs(mt_objective(q, problem)) < 1e-12);
  }
  SECTION("depth one is a scaled divergence") {
    auto prior = random_joint({4}, rng);
    auto cand = random_joint({4}, rng);
    MtProblem problem({prior}, TemperatureVector({3.0}));
    REQUIRE(std::abs(mt_objective(cand, problem) -
                     3.0 * relative_entropy(cand.flatten(), prior.flatten())) < 1e-12);
  }
  SECTION("matches an independent marginal-divergence sum") {
    auto problem = random_problem({2, 2}, {0.8, 1.4}, rng);
    auto cand = random_joint({2, 2}, rng);
    const double expected =
        0.8 * relative_entropy(marginalize(cand, 1), problem.priors[0]) +
        1.4 * relative_entropy(cand, problem.priors[1]);
    REQUIRE(std::abs(mt_objective(cand, problem) - expected) < 1e-12);
  }
  SECTION("axis mismatch throws") {
    auto problem = random_problem({2, 2}, {1.0, 1.0}, rng);
    REQUIRE_THROWS_AS(mt_objective(random_joint({2, 3}, rng), problem), DimensionError);
  }
}

TEST_CASE("grid oracle") {
  Rng rng(24, 0);

  SECTION("preconditions") {
    auto problem = random_problem({2, 2}, {1.0, 1.0}, rng);
    REQUIRE_THROWS_AS(brute_force_minimize(problem, 5), DomainError);
    auto big = random_problem({5, 5}, {1.0, 1.0}, rng);
    REQUIRE_THROWS_AS(brute_force_minimize(big, 100), DeskScaleError);
  }

  SECTION("depth one recovers a grid-representable prior exactly") {
    FiniteJoint prior({4}, {0.1, 0.2, 0.3, 0.4});
    auto got = brute_force_minimize(MtProblem({prior}, TemperatureVector({1.0})), 10);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(std::abs(got.joint[i] - prior[i]) < 1e-15);
    REQUIRE(std::abs(got.objective) < 1e-12);
  }

  SECTION("dynamic program matches exhaustive composition enumeration") {
    for (int trial = 0; trial < 20; ++trial) {
      auto problem = random_problem({2, 2}, {0.3 + rng.uniform(), 0.3 + rng.uniform()}, rng);
      const int grid = 24;
      const double reference = enumerate_grid_minimum(problem, grid);
      const double got = brute_force_minimize(problem, grid).objective;
      REQUIRE(std::abs(got - reference) < 1e-12);
    }
    for (int trial = 0; trial < 5; ++trial) {
      auto problem = random_problem({2, 3}, {0.5, 1.0}, rng);
      const int grid = 16;
      REQUIRE(std::abs(brute_force_minimize(problem, grid).objective -
                       enumerate_grid_minimum(problem, grid)) < 1e-12);
    }
  }

  SECTION("grid minimum brackets the MT optimum") {
    for (int trial = 0; trial < 8; ++trial) {
      auto problem = random_problem({2, 2}, {0.3 + rng.uniform(), 0.3 + rng.uniform()}, rng);
      auto sol = mt_solve(problem);
      auto grid = brute_force_minimize(problem, 200);
      REQUIRE(sol.objective <= grid.objective + 0.01);
      REQUIRE(grid.objective >= sol.objective - 1e-9);  // nothing on the grid beats the optimum
    }
  }
}

// hidden: run explicitly with ./test_mt "[stress]" (minutes of enumeration)
TEST_CASE("grid dynamic program matches enumeration at scale", "[.][stress]") {
  Rng rng(2718, 0);
  for (int trial = 0; trial < 3; ++trial) {
    auto problem = random_problem({2, 3}, {0.3 + rng.uniform(), 0.3 + rng.uniform()}, rng);
    REQUIRE(brute_force_minimize(problem, 60).objective ==
            Catch::Approx(enumerate_grid_minimum(problem, 60)).margin(1e-13));
  }
  for (int trial = 0; trial < 2; ++trial) {
    auto problem = random_problem(
        {2, 2, 2}, {0.3 + rng.uniform(), 0.3 + rng.uniform(), 0.3 + rng.uniform()}, rng);
    REQUIRE(brute_force_minimize(problem, 30).objective ==
            Catch::Approx(enumerate_grid_minimum(problem, 30)).margin(1e-13));
  }
}

TEST_CASE("mt optimality probes") {
  Rng rng(25, 0);

  SECTION("perturbations strictly increase the objective") {
    auto problem = random_problem({2, 2, 2}, {0.6, 1.1, 0.9}, rng);
    auto sol = mt_solve(problem);
    for (int j = 0; j < 20; ++j) {
      auto moved = testutil::perturb_on_simplex(sol.joint.flatten(), rng, 1e-3);
      FiniteJoint cand(problem.axis_sizes(), moved.probs());
      REQUIRE(mt_objective(cand, problem) > sol.objective);
    }
  }
}

TEST_CASE("build_twisted_problem") {
  Rng rng(26, 0);
  auto q1 = random_distribution(2, rng);
  auto q2 = random_distribution(2, rng);
  auto prior2 = FiniteJoint::product(q1, q2);
  std::vector<FiniteJoint> priors{FiniteJoint::from_distribution(q1), prior2};

  SECTION("zero risk leaves the deepest prior unchanged") {
    auto problem = build_twisted_problem(priors, TemperatureVector({2.0, 1.0}),
                                         std::vector<double>(4, 0.0));
    for (std::size_t c = 0; c < 4; ++c) REQUIRE(std::abs(problem.priors[1][c] - prior2[c]) < 1e-15);
  }

  SECTION("infinite-temperature proxy flattens the tilt") {
    std::vector<double> risk{0.0, 1.0, 1.0, 2.0};
    auto problem = build_twisted_problem(priors, TemperatureVector({2e9, 1e9}), risk);
    REQUIRE(total_variation(problem.priors[1], prior2) < 1e-6);
  }

  SECTION("risk table must be finite and nonnegative") {
    REQUIRE_THROWS_AS(
        build_twisted_problem(priors, TemperatureVector({2.0, 1.0}), {0.0, -1.0, 0.0, 0.0}),
        DomainError);
    REQUIRE_THROWS_AS(build_twisted_problem(priors, TemperatureVector({2.0, 1.0}),
                                            {0.0, kInfinity, 0.0, 0.0}),
                      DomainError);
    REQUIRE_THROWS_AS(
        build_twisted_problem(priors, TemperatureVector({2.0, 1.0}), {0.0, 0.0, 0.0}),
        DimensionError);
  }

  SECTION("flat priors with the staircase risk reproduce the closed form") {
    auto flat1 = FiniteDistribution::uniform(2);
    auto flat2 = FiniteDistribution::uniform(2);
    std::vector<double> risk{0.0, 1.0, 1.0, 2.0};
    auto problem = build_twisted_problem(
        {FiniteJoint::from_distribution(flat1), FiniteJoint::product(flat1, flat2)},
        TemperatureVector({2.0, 1.0}), risk);
    auto sol = mt_solve(problem);
    auto direct = product_prior_twisted(flat1, flat2, risk, 2.0, 1.0);
    for (std::size_t c = 0; c < 4; ++c) REQUIRE(std::abs(sol.joint[c] - direct[c]) < 1e-10);
  }

  SECTION("matches the closed form for random product priors and temperatures") {
    for (int trial = 0; trial < 50; ++trial) {
      auto p1 = random_distribution(2, rng);
      auto p2 = random_distribution(3, rng);
      std::vector<double> risk(6);
      for (auto& r : risk) r = 2.0 * rng.uniform();
      const double a1 = 0.5 + rng.uniform(), a2 = 0.5 + rng.uniform();
      auto problem = build_twisted_problem(
          {FiniteJoint::from_distribution(p1), FiniteJoint::product(p1, p2)},
          TemperatureVector({a1, a2}), risk);
      auto sol = mt_solve(problem);
      auto direct = product_prior_twisted(p1, p2, risk, a1, a2);
      for (std::size_t c = 0; c < 6; ++c) REQUIRE(std::abs(sol.joint[c] - direct[c]) < 1e-10);
    }
  }

  SECTION("matches the general-prior closed form without the product assumption") {
    for (int trial = 0; trial < 50; ++trial) {
      auto p1 = random_distribution(2, rng);
      auto joint2 = random_joint({2, 2}, rng);
      std::vector<double> risk(4);
      for (auto& r : risk) r = 2.0 * rng.uniform();
      const double a1 = 0.5 + rng.uniform(), a2 = 0.5 + rng.uniform();
      auto problem = build_twisted_problem({FiniteJoint::from_distribution(p1), joint2},
                                           TemperatureVector({a1, a2}), risk);
      auto sol = mt_solve(problem);
      auto direct = general_prior_twisted(p1, joint2, risk, a1, a2);
      for (std::size_t c = 0; c < 4; ++c) REQUIRE(std::abs(sol.joint[c] - direct[c]) < 1e-10);
    }
  }

  SECTION("the Gibbs posterior minimizes risk plus scaled divergence") {
    // objective(P) = E_P[risk] + (1/gamma) KL(P || Q); the normalized
    // exp(-gamma risk) Q weights must beat every perturbation
    Rng probe_rng(27, 0);
    for (int trial = 0; trial < 20; ++trial) {
      auto prior = random_distribution(5, probe_rng);
      std::vector<double> risk(5);
      for (auto& r : risk) r = 2.0 * probe_rng.uniform();
      const double gamma = 0.3 + 2.0 * probe_rng.uniform();
      std::vector<double> w(5);
      for (std::size_t i = 0; i < 5; ++i) w[i] = std::exp(-gamma * risk[i]) * prior[i];
      auto gibbs = FiniteDistribution::normalized(w);
      auto objective = [&](const FiniteDistribution& p) {
        double mean_risk = 0.0;
        for (std::size_t i = 0; i < 5; ++i) mean_risk += p[i] * risk[i];
        return mean_risk + relative_entropy(p, prior) / gamma;
      };
      const double at_gibbs = objective(gibbs);
      for (int j = 0; j < 20; ++j)
        REQUIRE(objective(testutil::perturb_on_simplex(gibbs, probe_rng, 0.05)) >=
                at_gibbs - 1e-12);
    }
  }

  SECTION("single level degenerates to the Gibbs posterior") {
    auto prior = random_distribution(4, rng);
    std::vector<double> risk{0.3, 1.2, 0.0, 2.5};
    const double t1 = 0.8;  // gamma = 1/t1
    auto problem = build_twisted_problem({FiniteJoint::from_distribution(prior)},
                                         TemperatureVector({t1}), risk);
    auto sol = mt_solve(problem);
    std::vector<double> direct(4);
    for (std::size_t i = 0; i < 4; ++i) direct[i] = std::exp(-risk[i] / t1) * prior[i];
    auto expected = FiniteDistribution::normalized(direct);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(std::abs(sol.joint[i] - expected[i]) < 1e-12);
  }
}
