#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mlgibbs/bounds.hpp"
#include "mlgibbs/mt.hpp"
#include "mlgibbs/net.hpp"
#include "test_helpers.hpp"

using namespace mlgibbs;
using testutil::random_distribution;

namespace {

BoundInputs random_inputs(std::size_t d, Rng& rng) {
  BoundInputs in;
  in.n = 1 + rng.below(1000);
  in.lipschitz = 0.5 + 4.0 * rng.uniform();
  in.product_norm = 0.5 + 2.0 * rng.uniform();
  in.input_radius = 0.5 + 3.0 * rng.uniform();
  for (std::size_t k = 0; k < d; ++k) {
    in.betas.push_back(0.1 + rng.uniform());
    in.gammas.push_back(0.1 + 2.0 * rng.uniform());
    in.mi_terms.push_back(2.0 * rng.uniform());
    in.kl_terms.push_back(2.0 * rng.uniform());
  }
  return in;
}

double chained_bound_oracle(const BoundInputs& in) {
  long double s = 0.0L;
  for (std::size_t k = 0; k < in.betas.size(); ++k)
    s += static_cast<long double>(in.betas[k]) * std::sqrt(static_cast<long double>(in.mi_terms[k]));
  const long double c = static_cast<long double>(in.lipschitz) * in.product_norm *
                        in.input_radius * std::sqrt(2.0L);
  return static_cast<double>(c / std::sqrt(static_cast<long double>(in.n)) * s);
}

}  // namespace

TEST_CASE("chained generalization bound") {
  Rng rng(41, 0);

  SECTION("zero information gives a zero bound") {
    auto in = random_inputs(3, rng);
    in.mi_terms.assign(3, 0.0);
    REQUIRE(chained_generalization_bound(in) == 0.0);
  }
  SECTION("single-level arithmetic identity") {
    BoundInputs in;
    in.n = 1;
    // pick constants so C = L M R sqrt(2) = 1
    in.lipschitz = 1.0;
    in.product_norm = 1.0;
    in.input_radius = 1.0 / std::numbers::sqrt2;
    in.betas = {1.0};
    in.mi_terms = {4.0};
    REQUIRE(chained_generalization_bound(in) == Catch::Approx(2.0).margin(1e-12));
  }
  SECTION("matches term-by-term recomputation on random inputs") {
    for (int trial = 0; trial < 1000; ++trial) {
      auto in = random_inputs(1 + rng.below(4), rng);
      REQUIRE(chained_generalization_bound(in) == Catch::Approx(chained_bound_oracle(in)).epsilon(1e-12));
    }
  }
  SECTION("missing mutual information terms throw") {
    auto in = random_inputs(2, rng);
    in.mi_terms.clear();
    REQUIRE_THROWS_AS(chained_generalization_bound(in), DomainError);
  }
}

TEST_CASE("tangent-line relaxation") {
  Rng rng(42, 0);

  SECTION("at the tangency point the relaxation meets the sqrt bound") {
    auto in = random_inputs(3, rng);
    std::vector<double> kls(3);
    for (std::size_t k = 0; k < 3; ++k) kls[k] = 1.0 / (4.0 * in.gammas[k] * in.gammas[k]);
    double sqrt_form = 0.0;
    for (std::size_t k = 0; k < 3; ++k) sqrt_form += in.betas[k] * std::sqrt(kls[k]);
    sqrt_form *= in.chain_coeff() / std::sqrt(static_cast<double>(in.n));
    REQUIRE(relaxed_objective(in, kls) == Catch::Approx(sqrt_form).epsilon(1e-12));
  }
  SECTION("zero divergences leave only the 1/(4 gamma) floor") {
    auto in = random_inputs(2, rng);
    const std::vector<double> kls(2, 0.0);
    double expected = 0.0;
    for (std::size_t k = 0; k < 2; ++k) expected += in.betas[k] / (4.0 * in.gammas[k]);
    expected *= in.chain_coeff() / std::sqrt(static_cast<double>(in.n));
    REQUIRE(relaxed_objective(in, kls) == Catch::Approx(expected).epsilon(1e-12));
  }
  SECTION("dominates the sqrt form everywhere") {
    for (int trial = 0; trial < 1000; ++trial) {
      auto in = random_inputs(1 + rng.below(4), rng);
      std::vector<double> kls(in.betas.size());
      for (auto& v : kls) v = 3.0 * rng.uniform();
      double sqrt_form = 0.0;
      for (std::size_t k = 0; k < kls.size(); ++k) sqrt_form += in.betas[k] * std::sqrt(kls[k]);
      sqrt_form *= in.chain_coeff() / std::sqrt(static_cast<double>(in.n));
      REQUIRE(relaxed_objective(in, kls) >= sqrt_form - 1e-12);
    }
  }
  SECTION("monotone in every divergence input") {
    auto in = random_inputs(3, rng);
    std::vector<double> kls{0.5, 1.0, 0.2};
    const double base = relaxed_objective(in, kls);
    for (std::size_t k = 0; k < 3; ++k) {
      auto bumped = kls;
      bumped[k] += 0.3;
      REQUIRE(relaxed_objective(in, bumped) >= base);
    }
  }
  SECTION("nonpositive gamma is rejected") {
    auto in = random_inputs(2, rng);
    in.gammas[1] = 0.0;
    REQUIRE_THROWS_AS(relaxed_objective(in, {0.1, 0.2}), DomainError);
  }
}

TEST_CASE("excess-risk bound over discrete spaces") {
  Rng rng(43, 0);

  SECTION("uniform prior over 2^k prefixes gives k ln 2 divergences") {
    // D(dirac || uniform over 2^k cells) = k ln 2; feed those and check the
    // optimized form directly
    BoundInputs in = random_inputs(3, rng);
    for (std::size_t k = 0; k < 3; ++k)
      in.kl_terms[k] = -std::log(1.0 / std::pow(2.0, static_cast<double>(k + 1)));
    for (std::size_t k = 0; k < 3; ++k)
      REQUIRE(in.kl_terms[k] == Catch::Approx(static_cast<double>(k + 1) * std::log(2.0)).epsilon(1e-14));
    auto report = excess_risk_bound(in);
    double expected = 0.0;
    for (std::size_t k = 0; k < 3; ++k) expected += in.betas[k] * std::sqrt(in.kl_terms[k]);
    expected *= in.chain_coeff() / std::sqrt(static_cast<double>(in.n));
    REQUIRE(report.optimized == Catch::Approx(expected).epsilon(1e-12));
  }

  SECTION("plugging in the optimal gammas attains the optimized value") {
    for (int trial = 0; trial < 100; ++trial) {
      auto in = random_inputs(1 + rng.below(3), rng);
      auto report = excess_risk_bound(in);
      in.gammas = report.gamma_star;
      REQUIRE(excess_risk_bound(in).bound == Catch::Approx(report.optimized).epsilon(1e-12));
    }
  }

  SECTION("zero divergence reports an infinite gamma and a zero term") {
    auto in = random_inputs(2, rng);
    in.kl_terms = {0.0, 1.0};
    auto report = excess_risk_bound(in);
    REQUIRE(report.gamma_star[0] == kInfinity);
    const double scale = in.chain_coeff() / std::sqrt(static_cast<double>(in.n));
    REQUIRE(report.optimized ==
            Catch::Approx(scale * in.betas[1] * std::sqrt(1.0)).epsilon(1e-12));
  }

  SECTION("flat priors over a 2x2 space match hand enumeration") {
    BoundInputs in;
    in.n = 4;
    in.lipschitz = 4.0;
    in.product_norm = 1.0;
    in.input_radius = 1.0;
    in.betas = {0.5, 0.5 * std::exp(0.5)};
    in.gammas = {1.0, 2.0};
    // best prefix mass 1/2 at level 1, 1/4 at level 2 under flat priors
    in.kl_terms = {std::log(2.0), std::log(4.0)};
    const double c = 4.0 * std::numbers::sqrt2;
    const double expected =
        c / 2.0 *
        (0.5 * (1.0 * std::log(2.0) + 0.25) +
         0.5 * std::exp(0.5) * (2.0 * std::log(4.0) + 0.125));
    REQUIRE(excess_risk_bound(in).bound == Catch::Approx(expected).epsilon(1e-12));
  }

  SECTION("the optimal gammas beat 200 random gamma vectors") {
    for (int trial = 0; trial < 20; ++trial) {
      auto in = random_inputs(3, rng);
      const double optimized = excess_risk_bound(in).optimized;
      for (int j = 0; j < 200; ++j) {
        for (auto& g : in.gammas) g = 0.01 + 5.0 * rng.uniform();
        REQUIRE(excess_risk_bound(in).bound >= optimized - 1e-12);
      }
    }
  }
}

TEST_CASE("high-probability form") {
  Rng rng(44, 0);
  auto in = random_inputs(2, rng);

  SECTION("huge thresholds approach certainty") {
    REQUIRE(high_prob_bound(in, 1e9) == Catch::Approx(1.0).margin(1e-6));
  }
  SECTION("the Markov threshold at the excess bound is zero") {
    const double excess = excess_risk_bound(in).bound;
    REQUIRE(high_prob_bound(in, excess) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("equals one minus the ratio before clamping") {
    for (int trial = 0; trial < 200; ++trial) {
      auto inputs = random_inputs(1 + rng.below(3), rng);
      const double eps = 0.5 + 3.0 * rng.uniform();
      const double raw = 1.0 - excess_risk_bound(inputs).bound / eps;
      REQUIRE(high_prob_bound(inputs, eps) ==
              Catch::Approx(std::min(1.0, std::max(0.0, raw))).margin(1e-12));
    }
  }
  SECTION("nonpositive epsilon throws") {
    REQUIRE_THROWS_AS(high_prob_bound(in, 0.0), DomainError);
  }
}

TEST_CASE("neighborhood form") {
  Rng rng(45, 0);

  SECTION("a collapsed neighborhood coincides with the excess bound") {
    auto in = random_inputs(2, rng);
    REQUIRE(neighborhood_excess(in, 0.0, in.kl_terms) ==
            Catch::Approx(excess_risk_bound(in).bound).epsilon(1e-12));
  }
  SECTION("a uniform neighborhood over a fraction of a uniform prior") {
    // D(uniform over rho-fraction || uniform) = ln(1/rho)
    const double rho = 0.125;
    REQUIRE(-std::log(rho) == Catch::Approx(std::log(8.0)).epsilon(1e-14));
  }
  SECTION("matches term-by-term recomputation") {
    for (int trial = 0; trial < 200; ++trial) {
      auto in = random_inputs(2, rng);
      const double eps = rng.uniform();
      std::vector<double> kls{rng.uniform(), rng.uniform()};
      long double s = 0.0L;
      for (std::size_t k = 0; k < 2; ++k)
        s += static_cast<long double>(in.betas[k]) *
             (in.gammas[k] * kls[k] + 0.25L / in.gammas[k]);
      const double expected = eps + in.chain_coeff() / std::sqrt(static_cast<double>(in.n)) *
                                        static_cast<double>(s);
      REQUIRE(neighborhood_excess(in, eps, kls) == Catch::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("Gibbs posterior excess bound") {
  Rng rng(46, 0);

  SECTION("zero divergence leaves only the temperature term") {
    auto r = gibbs_excess(1.5, 50, 2.0, 0.0);
    REQUIRE(r.bound == Catch::Approx(2.0 * 1.5 * 1.5 / 100.0).epsilon(1e-14));
    REQUIRE(r.gamma_star == 0.0);
    REQUIRE(r.optimized == 0.0);
  }
  SECTION("the bound at the optimal gamma equals the optimized value") {
    for (int trial = 0; trial < 200; ++trial) {
      const double sigma = 0.5 + 2.0 * rng.uniform();
      const std::size_t n = 10 + rng.below(1000);
      const double kl = 0.1 + 3.0 * rng.uniform();
      auto r = gibbs_excess(sigma, n, 1.0, kl);
      auto at_star = gibbs_excess(sigma, n, r.gamma_star, kl);
      REQUIRE(at_star.bound == Catch::Approx(r.optimized).epsilon(1e-12));
      // AM-GM: no gamma does better
      for (int j = 0; j < 20; ++j) {
        const double g = 0.01 + 100.0 * rng.uniform();
        REQUIRE(gibbs_excess(sigma, n, g, kl).bound >= r.optimized - 1e-12);
      }
    }
  }
  SECTION("fixed instance against extended-precision arithmetic") {
    auto r = gibbs_excess(1.0, 100, 1.0, std::log(2.0));
    const double expected_star = std::sqrt(200.0 * std::log(2.0));
    REQUIRE(r.gamma_star == Catch::Approx(expected_star).epsilon(1e-14));
    REQUIRE(r.optimized == Catch::Approx(2.0 * std::sqrt(std::log(2.0) / 200.0)).epsilon(1e-14));
  }
  SECTION("convex in gamma") {
    for (int trial = 0; trial < 200; ++trial) {
      const double sigma = 0.5 + 2.0 * rng.uniform();
      const std::size_t n = 10 + rng.below(500);
      const double kl = 2.0 * rng.uniform();
      const double g1 = 0.05 + 5.0 * rng.uniform();
      const double g2 = 0.05 + 5.0 * rng.uniform();
      const double mid = gibbs_excess(sigma, n, 0.5 * (g1 + g2), kl).bound;
      const double avg = 0.5 * (gibbs_excess(sigma, n, g1, kl).bound +
                                gibbs_excess(sigma, n, g2, kl).bound);
      REQUIRE(mid <= avg + 1e-12);
    }
  }
  SECTION("domain errors") {
    REQUIRE_THROWS_AS(gibbs_excess(1.0, 10, 0.0, 1.0), DomainError);
    REQUIRE_THROWS_AS(gibbs_excess(1.0, 10, -1.0, 1.0), DomainError);
  }
}

TEST_CASE("Gibbs excess bound over uncountable spaces") {
  SECTION("centered posterior at the prior scale upper-bounds the grid minimum") {
    const double s = 1.0, rho = 1.0, sigma = 1.0, gamma = 10.0;
    const std::size_t n = 100, dim = 2;
    REQUIRE(gaussian_kl(0.0, s, s, dim) == 0.0);
    const double at_prior_scale = s * rho * std::sqrt(2.0) + gamma * sigma * sigma / 200.0;
    REQUIRE(gibbs_excess_continuous(sigma, n, gamma, rho, dim, s, 0.0) <=
            at_prior_scale + 1e-12);
  }
  SECTION("zero Lipschitz constant keeps the divergence floor") {
    const double v = gibbs_excess_continuous(1.0, 100, 10.0, 0.0, 2, 1.0, 0.0);
    REQUIRE(v >= 10.0 / 200.0);
    REQUIRE(v <= 10.0 / 200.0 + 1e-3);  // KL at the grid point nearest a = s
  }
  SECTION("matches a ten-thousand-point grid oracle") {
    const double got = gibbs_excess_continuous(1.0, 100, 10.0, 1.0, 2, 1.0, 1.0);
    double best = kInfinity;
    for (int i = 0; i < 10000; ++i) {
      const double a =
          std::exp(std::log(1e-6) + (std::log(1e3) - std::log(1e-6)) * i / 9999.0);
      const double v = a * 1.0 * std::sqrt(2.0) + gaussian_kl(1.0, a, 1.0, 2) / 10.0;
      best = std::min(best, v);
    }
    best += 10.0 * 1.0 / 200.0;
    REQUIRE(std::abs(got - best) / best < 1e-3);
  }
  SECTION("nonpositive scales throw") {
    REQUIRE_THROWS_AS(gibbs_excess_continuous(0.0, 100, 1.0, 1.0, 2, 1.0, 0.0), DomainError);
    REQUIRE_THROWS_AS(gibbs_excess_continuous(1.0, 100, 1.0, 1.0, 2, 0.0, 0.0), DomainError);
  }
}

TEST_CASE("bounds are monotone in the information terms and the sample count") {
  Rng rng(47, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    auto in = random_inputs(2, rng);
    const double t1 = chained_generalization_bound(in);
    const double t2 = excess_risk_bound(in).bound;
    auto bigger = in;
    const std::size_t k = rng.below(2);
    bigger.mi_terms[k] += 0.5;
    bigger.kl_terms[k] += 0.5;
    REQUIRE(chained_generalization_bound(bigger) >= t1);
    REQUIRE(excess_risk_bound(bigger).bound >= t2);
    auto more_data = in;
    more_data.n = in.n * 4;
    REQUIRE(chained_generalization_bound(more_data) <= t1);
    REQUIRE(excess_risk_bound(more_data).bound <= t2);
  }
}

TEST_CASE("exact prefix mutual informations") {
  Rng rng(48, 0);

  SECTION("a data-independent choice of weights carries no information") {
    auto pw = testutil::random_joint({2, 2}, rng);
    std::vector<double> cells;
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t c = 0; c < 4; ++c) cells.push_back(0.25 * pw[c]);
    auto mi = exact_mi_report(FiniteJoint({4, 2, 2}, cells));
    REQUIRE(mi.size() == 2);
    REQUIRE(std::abs(mi[0]) < 1e-12);
    REQUIRE(std::abs(mi[1]) < 1e-12);
  }
  SECTION("copying a uniform four-point input gives ln 4 at every level") {
    std::vector<double> cells(4 * 4, 0.0);
    for (std::size_t s = 0; s < 4; ++s) cells[s * 4 + s] = 0.25;
    auto mi = exact_mi_report(FiniteJoint({4, 2, 2}, cells));
    REQUIRE(mi[1] == Catch::Approx(std::log(4.0)).epsilon(1e-12));
    // the first weight coordinate carries the high bit of the copy
    REQUIRE(mi[0] == Catch::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SECTION("matches the difference decomposition on random posteriors") {
    for (int trial = 0; trial < 200; ++trial) {
      // random conditional P(w|s) with uniform P(s)
      const std::size_t ns = 3;
      std::vector<double> cells;
      std::vector<FiniteDistribution> rows;
      for (std::size_t s = 0; s < ns; ++s) rows.push_back(random_distribution(4, rng));
      for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t c = 0; c < 4; ++c) cells.push_back(rows[s][c] / static_cast<double>(ns));
      FiniteJoint joint({ns, 2, 2}, cells);
      auto mi = exact_mi_report(joint);
      // I(S; W1 W2) = E_S[ D(P_{W|S} || P_W) ]
      std::vector<double> pw(4, 0.0);
      for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t c = 0; c < 4; ++c) pw[c] += rows[s][c] / static_cast<double>(ns);
      double direct = 0.0;
      for (std::size_t s = 0; s < ns; ++s)
        direct += relative_entropy(rows[s], FiniteDistribution(pw)) / static_cast<double>(ns);
      REQUIRE(mi[1] == Catch::Approx(direct).margin(1e-10));
    }
  }
}

TEST_CASE("discrete pipeline: the chained bound dominates the exact generalization gap") {
  // Scalar two-layer nets over a four-element example space; everything is
  // enumerated exactly, so the bound can be compared against the true
  // expected gap of the twisted posterior.
  std::vector<LayerSpec> layers{LayerSpec(Eigen::MatrixXd::Ones(1, 1), 0.5),
                                LayerSpec(Eigen::MatrixXd::Ones(1, 1), 0.5)};
  NetSpec spec(layers, OutputActivation::kIdentity, 1.0);
  const auto cns = constants(spec);
  const std::vector<double> w1s{0.8, 1.2}, w2s{0.7, 1.3};
  const std::vector<double> xs{0.6, -0.8, 1.0, 0.3};
  const std::vector<double> ys{0.5, -0.2, 0.9, 0.1};

  auto loss_at = [&](std::size_t i, std::size_t j, std::size_t z) {
    const double h = w2s[j] * std::max(w1s[i] * xs[z], 0.0);
    return (h - ys[z]) * (h - ys[z]);
  };
  std::vector<double> statistical(4, 0.0);  // L_mu per weight cell
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t z = 0; z < 4; ++z) statistical[i * 2 + j] += 0.25 * loss_at(i, j, z);

  const std::size_t n = 2;
  const std::vector<double> betas{beta(spec.alphas(), 1), beta(spec.alphas(), 2)};
  const std::vector<double> gammas{0.5, 0.5};
  std::vector<double> temps(2);
  for (std::size_t k = 0; k < 2; ++k)
    temps[k] = cns.chain_coeff * betas[k] * gammas[k] / std::sqrt(static_cast<double>(n));

  // exact joint P(s, w1, w2) over the 16 equally likely datasets
  std::vector<double> joint_cells;
  double expected_gap = 0.0;
  for (std::size_t z1 = 0; z1 < 4; ++z1)
    for (std::size_t z2 = 0; z2 < 4; ++z2) {
      std::vector<double> risk(4);
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
          risk[i * 2 + j] = 0.5 * (loss_at(i, j, z1) + loss_at(i, j, z2));
      auto problem = build_twisted_problem(
          {FiniteJoint::uniform({2}), FiniteJoint::uniform({2, 2})},
          TemperatureVector(temps), risk);
      auto posterior = mt_solve(problem).joint;
      for (std::size_t c = 0; c < 4; ++c) {
        joint_cells.push_back(posterior[c] / 16.0);
        expected_gap += posterior[c] / 16.0 * (statistical[c] - risk[c]);
      }
    }
  FiniteJoint joint({16, 2, 2}, joint_cells);

  BoundInputs in;
  in.n = n;
  in.lipschitz = cns.lipschitz;
  in.product_norm = cns.product_norm;
  in.input_radius = spec.input_radius;
  in.betas = betas;
  in.mi_terms = exact_mi_report(joint);
  REQUIRE(in.mi_terms.size() == 2);
  REQUIRE(chained_generalization_bound(in) >= expected_gap - 1e-12);
}
