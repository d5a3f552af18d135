#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mlgibbs/bounds.hpp"
#include "mlgibbs/dataset.hpp"
#include "mlgibbs/distributions.hpp"
#include "mlgibbs/mt.hpp"
#include "mlgibbs/net.hpp"
#include "mlgibbs/rng.hpp"
#include "mlgibbs/sampler.hpp"

namespace mlgibbs {

struct VerifyOptions {
  std::uint64_t seed = 2024;
  bool inject_tilt_fault = false;  // test hook: perturbs tilt outputs so the
                                   // suite must go red, proving it can fail
};

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace verify_detail {

inline FiniteDistribution random_dist(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& v : w) v = 0.05 + rng.uniform();
  return FiniteDistribution::normalized(std::move(w));
}

inline FiniteJoint random_joint(std::vector<std::size_t> sizes, Rng& rng) {
  std::size_t cells = 1;
  for (auto s : sizes) cells *= s;
  std::vector<double> w(cells);
  for (auto& v : w) v = 0.05 + rng.uniform();
  return FiniteJoint::normalized(std::move(sizes), std::move(w));
}

inline FiniteDistribution tilt_hooked(const FiniteDistribution& p, const FiniteDistribution& q,
                                      double lambda, const VerifyOptions& opts) {
  FiniteDistribution t = tilt(p, q, lambda);
  if (!opts.inject_tilt_fault) return t;
  std::vector<double> w = t.probs();
  w[0] += 0.05;
  return FiniteDistribution::normalized(std::move(w));
}

inline FiniteDistribution perturb(const FiniteDistribution& p, Rng& rng, double magnitude) {
  const std::size_t n = p.size();
  std::vector<double> dir(n);
  double mean = 0.0;
  for (auto& v : dir) {
    v = rng.gaussian();
    mean += v;
  }
  mean /= static_cast<double>(n);
  double limit = magnitude;
  for (std::size_t i = 0; i < n; ++i) {
    dir[i] -= mean;
    if (dir[i] < 0.0) limit = std::min(limit, 0.9 * p[i] / -dir[i]);
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = p[i] + limit * dir[i];
  return FiniteDistribution::normalized(std::move(out));
}

struct RandomNet {
  NetSpec spec;
  NetParams params;
};

inline RandomNet random_net(const std::vector<std::size_t>& dims, OutputActivation act,
                            double input_radius, Rng& rng) {
  std::vector<LayerSpec> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    Eigen::MatrixXd ref(static_cast<Eigen::Index>(dims[k + 1]),
                        static_cast<Eigen::Index>(dims[k]));
    for (Eigen::Index c = 0; c < ref.cols(); ++c)
      for (Eigen::Index r = 0; r < ref.rows(); ++r) ref(r, c) = rng.gaussian();
    layers.emplace_back(ref, 0.05 + 0.45 * rng.uniform());
  }
  NetSpec spec(std::move(layers), act, input_radius);
  NetParams params = NetParams::at_references(spec);
  for (std::size_t k = 0; k < spec.depth(); ++k) {
    Eigen::MatrixXd g(params.weights[k].rows(), params.weights[k].cols());
    for (Eigen::Index c = 0; c < g.cols(); ++c)
      for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = rng.gaussian();
    params.weights[k] += g * (rng.uniform() * spec.layers[k].ball_bound() / g.norm());
  }
  return RandomNet{std::move(spec), std::move(params)};
}

}  // namespace verify_detail

// Runs every registered property group and reports one result per group.
// Fast variants of the full test-suite checks, suitable for a CLI gate.
inline std::vector<PropertyResult> run_property_suite(const VerifyOptions& opts) {
  namespace vd = verify_detail;
  std::vector<PropertyResult> results;
  auto add = [&](const std::string& name, const std::function<std::string()>& body) {
    PropertyResult r;
    r.name = name;
    try {
      r.detail = body();  // empty detail means pass
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = e.what();
    }
    results.push_back(std::move(r));
  };

  add("kl-nonnegativity", [&] {
    Rng rng(opts.seed, 1);
    for (int i = 0; i < 300; ++i)
      if (relative_entropy(vd::random_dist(5, rng), vd::random_dist(5, rng)) < 0.0)
        return std::string("negative divergence");
    return std::string();
  });

  add("kl-self-identity", [&] {
    Rng rng(opts.seed, 2);
    for (int i = 0; i < 100; ++i) {
      auto p = vd::random_dist(6, rng);
      if (relative_entropy(p, p) != 0.0) return std::string("self divergence not zero");
    }
    return std::string();
  });

  add("chain-rule", [&] {
    Rng rng(opts.seed, 3);
    for (int i = 0; i < 300; ++i) {
      auto p = vd::random_joint({3, 4}, rng);
      auto q = vd::random_joint({3, 4}, rng);
      const double lhs = relative_entropy(p, q);
      const double rhs =
          relative_entropy(marginalize(p, 1), marginalize(q, 1)) +
          conditional_relative_entropy(chain_factorize(p)[1], chain_factorize(q)[1],
                                       marginalize(p, 1).flatten());
      if (std::abs(lhs - rhs) > 1e-10) return std::string("chain rule off by more than 1e-10");
    }
    return std::string();
  });

  add("conditional-kl-equality-case", [&] {
    Rng rng(opts.seed, 4);
    auto p = vd::random_joint({3, 3}, rng);
    auto f = chain_factorize(p);
    if (conditional_relative_entropy(f[1], f[1], marginalize(p, 1).flatten()) != 0.0)
      return std::string("equal conditionals should give zero");
    return std::string();
  });

  add("tilting-identity", [&] {
    Rng rng(opts.seed, 5);
    for (int i = 0; i < 300; ++i) {
      auto p = vd::random_dist(4, rng);
      auto q = vd::random_dist(4, rng);
      auto r = vd::random_dist(4, rng);
      for (double lambda : {0.1, 0.5, 0.9}) {
        const double lhs =
            lambda * relative_entropy(p, q) + (1.0 - lambda) * relative_entropy(p, r);
        const double rhs = relative_entropy(p, vd::tilt_hooked(q, r, lambda, opts)) +
                           (1.0 - lambda) * renyi_divergence(q, r, lambda);
        if (std::abs(lhs - rhs) > 1e-10) return std::string("identity off by more than 1e-10");
      }
    }
    return std::string();
  });

  add("tilt-endpoints", [&] {
    Rng rng(opts.seed, 6);
    auto p = vd::random_dist(4, rng);
    auto q = vd::random_dist(4, rng);
    if (vd::tilt_hooked(p, q, 1.0, opts).probs() != p.probs())
      return std::string("lambda=1 should return p");
    if (vd::tilt_hooked(p, q, 0.0, opts).probs() != q.probs())
      return std::string("lambda=0 should return q");
    return std::string();
  });

  add("tilt-minimality", [&] {
    Rng rng(opts.seed, 7);
    for (int i = 0; i < 50; ++i) {
      auto q = vd::random_dist(4, rng);
      auto r = vd::random_dist(4, rng);
      const double lambda = 0.1 + 0.8 * rng.uniform();
      auto t = vd::tilt_hooked(q, r, lambda, opts);
      const double at_tilt =
          lambda * relative_entropy(t, q) + (1.0 - lambda) * relative_entropy(t, r);
      for (int j = 0; j < 10; ++j) {
        auto moved = vd::perturb(t, rng, 0.05);
        const double val =
            lambda * relative_entropy(moved, q) + (1.0 - lambda) * relative_entropy(moved, r);
        if (val < at_tilt - 1e-12) return std::string("tilt is not the minimizer");
      }
    }
    return std::string();
  });

  add("renyi-continuity", [&] {
    Rng rng(opts.seed, 8);
    for (int i = 0; i < 100; ++i) {
      auto p = vd::random_dist(4, rng);
      auto q = vd::random_dist(4, rng);
      const double kl = relative_entropy(p, q);
      if (std::abs(renyi_divergence(p, q, 1.0 + 1e-6) - kl) > 1e-4 ||
          std::abs(renyi_divergence(p, q, 1.0 - 1e-6) - kl) > 1e-4)
        return std::string("discontinuity at order one");
    }
    return std::string();
  });

  add("renyi-nonnegativity", [&] {
    Rng rng(opts.seed, 9);
    for (int i = 0; i < 200; ++i) {
      auto p = vd::random_dist(5, rng);
      auto q = vd::random_dist(5, rng);
      for (double a : {0.3, 0.7, 1.5, 3.0})
        if (renyi_divergence(p, q, a) < 0.0) return std::string("negative Renyi divergence");
    }
    return std::string();
  });

  add("mi-decomposition", [&] {
    Rng rng(opts.seed, 10);
    for (int i = 0; i < 200; ++i) {
      auto j = vd::random_joint({3, 3}, rng);
      auto qy = vd::random_dist(3, rng);
      std::vector<double> qy_rows;
      for (int r = 0; r < 3; ++r)
        qy_rows.insert(qy_rows.end(), qy.probs().begin(), qy.probs().end());
      std::vector<double> py(3, 0.0);
      for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t y = 0; y < 3; ++y) py[y] += j[x * 3 + y];
      const double rhs = conditional_relative_entropy(chain_factorize(j)[1],
                                                      Conditional(3, 3, qy_rows),
                                                      marginalize(j, 1).flatten()) -
                         relative_entropy(FiniteDistribution(py), qy);
      if (std::abs(mutual_information(j) - rhs) > 1e-10)
        return std::string("decomposition off by more than 1e-10");
    }
    return std::string();
  });

  add("mi-nonnegativity", [&] {
    Rng rng(opts.seed, 11);
    for (int i = 0; i < 200; ++i)
      if (mutual_information(vd::random_joint({3, 4}, rng)) < 0.0)
        return std::string("negative mutual information");
    return std::string();
  });

  add("marginalize-mass", [&] {
    Rng rng(opts.seed, 12);
    for (int i = 0; i < 100; ++i) {
      auto j = vd::random_joint({2, 3, 2}, rng);
      for (std::size_t k = 1; k <= 3; ++k) {
        double mass = 0.0;
        auto m = marginalize(j, k);
        for (std::size_t c = 0; c < m.cell_count(); ++c) mass += m[c];
        if (std::abs(mass - 1.0) > 1e-12) return std::string("marginal mass drifted");
      }
    }
    return std::string();
  });

  add("factorize-recompose", [&] {
    Rng rng(opts.seed, 13);
    for (int i = 0; i < 100; ++i) {
      auto j = vd::random_joint({2, 2, 3}, rng);
      auto back = recompose(chain_factorize(j));
      for (std::size_t c = 0; c < j.cell_count(); ++c)
        if (std::abs(back[c] - j[c]) > 1e-12) return std::string("recomposition mismatch");
    }
    return std::string();
  });

  add("mt-certified-minimum", [&] {
    Rng rng(opts.seed, 14);
    for (int i = 0; i < 100; ++i) {
      std::vector<FiniteJoint> priors{vd::random_joint({2}, rng), vd::random_joint({2, 2}, rng),
                                      vd::random_joint({2, 2, 2}, rng)};
      MtProblem problem(priors, TemperatureVector({0.3 + rng.uniform(), 0.3 + rng.uniform(),
                                                   0.3 + rng.uniform()}));
      auto sol = mt_solve(problem);
      if (std::abs(sol.objective - sol.renyi_residue) > 1e-9)
        return std::string("residue differs from evaluated objective");
    }
    return std::string();
  });

  add("mt-vs-grid-oracle", [&] {
    Rng rng(opts.seed, 15);
    for (int i = 0; i < 4; ++i) {
      std::vector<FiniteJoint> priors{vd::random_joint({2}, rng), vd::random_joint({2, 2}, rng)};
      MtProblem problem(priors, TemperatureVector({0.5 + rng.uniform(), 0.5 + rng.uniform()}));
      auto sol = mt_solve(problem);
      auto grid = brute_force_minimize(problem, 200);
      if (sol.objective > grid.objective + 0.01) return std::string("grid beat the solver");
      if (grid.objective < sol.objective - 1e-9)
        return std::string("grid fell below the certified minimum");
    }
    return std::string();
  });

  add("mt-two-level-closed-form", [&] {
    Rng rng(opts.seed, 16);
    for (int i = 0; i < 50; ++i) {
      auto q1 = vd::random_dist(2, rng);
      auto r2 = vd::random_joint({2, 3}, rng);
      const double a1 = 0.3 + rng.uniform(), a2 = 0.3 + rng.uniform();
      auto sol = mt_solve(
          MtProblem({FiniteJoint::from_distribution(q1), r2}, TemperatureVector({a1, a2})));
      auto expect =
          vd::tilt_hooked(q1, marginalize(r2, 1).flatten(), a1 / (a1 + a2), opts);
      auto got = marginalize(sol.joint, 1);
      for (std::size_t x = 0; x < 2; ++x)
        if (std::abs(got[x] - expect[x]) > 1e-12)
          return std::string("marginal differs from the tilted closed form");
    }
    return std::string();
  });

  add("mt-uniqueness-probe", [&] {
    Rng rng(opts.seed, 17);
    std::vector<FiniteJoint> priors{vd::random_joint({2}, rng), vd::random_joint({2, 2}, rng)};
    MtProblem problem(priors, TemperatureVector({0.8, 1.2}));
    auto sol = mt_solve(problem);
    for (int j = 0; j < 20; ++j) {
      auto moved = vd::perturb(sol.joint.flatten(), rng, 1e-3);
      if (mt_objective(FiniteJoint(problem.axis_sizes(), moved.probs()), problem) <=
          sol.objective)
        return std::string("perturbation did not increase the objective");
    }
    return std::string();
  });

  add("twisted-posterior-closed-form", [&] {
    Rng rng(opts.seed, 18);
    for (int i = 0; i < 30; ++i) {
      auto q1 = vd::random_dist(2, rng);
      auto q2 = vd::random_dist(2, rng);
      std::vector<double> risk(4);
      for (auto& r : risk) r = 2.0 * rng.uniform();
      const double a1 = 0.5 + rng.uniform(), a2 = 0.5 + rng.uniform();
      auto sol = mt_solve(build_twisted_problem(
          {FiniteJoint::from_distribution(q1), FiniteJoint::product(q1, q2)},
          TemperatureVector({a1, a2}), risk));
      // direct cellwise evaluation
      std::vector<double> inner(2, 0.0);
      for (std::size_t x = 0; x < 2; ++x)
        for (std::size_t y = 0; y < 2; ++y)
          inner[x] += std::exp(-risk[x * 2 + y] / a2) * q2[y];
      std::vector<double> first(2);
      for (std::size_t x = 0; x < 2; ++x)
        first[x] = std::pow(inner[x], a2 / (a1 + a2)) * q1[x];
      const double z = first[0] + first[1];
      for (std::size_t x = 0; x < 2; ++x)
        for (std::size_t y = 0; y < 2; ++y) {
          const double direct =
              first[x] / z * std::exp(-risk[x * 2 + y] / a2) * q2[y] / inner[x];
          if (std::abs(sol.joint[x * 2 + y] - direct) > 1e-10)
            return std::string("posterior differs from the closed form");
        }
    }
    return std::string();
  });

  add("gibbs-degeneracy", [&] {
    Rng rng(opts.seed, 19);
    auto prior = vd::random_dist(4, rng);
    std::vector<double> risk{0.3, 1.2, 0.0, 2.5};
    auto sol = mt_solve(build_twisted_problem({FiniteJoint::from_distribution(prior)},
                                              TemperatureVector({0.8}), risk));
    std::vector<double> w(4);
    for (std::size_t i = 0; i < 4; ++i) w[i] = std::exp(-risk[i] / 0.8) * prior[i];
    auto expected = FiniteDistribution::normalized(w);
    for (std::size_t i = 0; i < 4; ++i)
      if (std::abs(sol.joint[i] - expected[i]) > 1e-12)
        return std::string("single level is not the Gibbs posterior");
    return std::string();
  });

  add("consistent-prior-collapse", [&] {
    Rng rng(opts.seed, 20);
    auto q = vd::random_joint({2, 3}, rng);
    auto sol = mt_solve(MtProblem({marginalize(q, 1), q}, TemperatureVector({0.7, 1.3})));
    for (std::size_t c = 0; c < q.cell_count(); ++c)
      if (std::abs(sol.joint[c] - q[c]) > 1e-13)
        return std::string("consistent priors should return the deepest prior");
    return std::string();
  });

  add("spectral-norm-oracle", [&] {
    Rng rng(opts.seed, 21);
    for (int i = 0; i < 10; ++i) {
      Eigen::MatrixXd a(8, 6);
      for (Eigen::Index c = 0; c < 6; ++c)
        for (Eigen::Index r = 0; r < 8; ++r) a(r, c) = rng.gaussian();
      const double dense = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
      if (std::abs(spectral_norm(a) - dense) > 1e-8 * dense)
        return std::string("power iteration disagrees with the dense solver");
    }
    return std::string();
  });

  add("link-gap-sweep", [&] {
    Rng rng(opts.seed, 22);
    for (int i = 0; i < 300; ++i) {
      auto net = vd::random_net({4, 6, 3}, OutputActivation::kSoftmax, 2.0, rng);
      const auto cns = constants(net.spec);
      const std::size_t level = 1 + rng.below(2);
      std::vector<Eigen::MatrixXd> prefix(net.params.weights.begin(),
                                          net.params.weights.begin() +
                                              static_cast<std::ptrdiff_t>(level - 1));
      Eigen::VectorXd x(4);
      for (Eigen::Index k = 0; k < 4; ++k) x[k] = rng.gaussian();
      if (x.norm() > 2.0) x *= 2.0 / x.norm();
      const double gap = link_gap(net.spec, prefix, net.params.weights[level - 1], x);
      if (gap > beta(net.spec.alphas(), level) * cns.product_norm * x.norm() + 1e-9)
        return std::string("link bound violated");
    }
    return std::string();
  });

  add("loss-lipschitz", [&] {
    Rng rng(opts.seed, 23);
    for (int i = 0; i < 200; ++i) {
      auto net = vd::random_net({3, 5, 4}, OutputActivation::kSoftmax, 2.0, rng);
      NetParams other = NetParams::at_references(net.spec);
      Eigen::VectorXd x(3);
      for (Eigen::Index k = 0; k < 3; ++k) x[k] = rng.gaussian();
      if (x.norm() > 2.0) x *= 2.0 / x.norm();
      Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
      y[static_cast<Eigen::Index>(rng.below(4))] = 1.0;
      Example ex{x, y};
      const double gap =
          (forward(net.spec, net.params, x) - forward(net.spec, other, x)).norm();
      if (std::abs(loss(net.spec, net.params, ex) - loss(net.spec, other, ex)) >
          constants(net.spec).lipschitz * gap + 1e-9)
        return std::string("Lipschitz surrogate violated");
    }
    return std::string();
  });

  add("output-norm-bounds", [&] {
    Rng rng(opts.seed, 24);
    for (int i = 0; i < 100; ++i) {
      auto net = vd::random_net({4, 5, 3}, OutputActivation::kSoftmax, 2.0, rng);
      Eigen::VectorXd x(4);
      for (Eigen::Index k = 0; k < 4; ++k) x[k] = rng.gaussian();
      if (x.norm() > 2.0) x *= 2.0 / x.norm();
      if (forward(net.spec, net.params, x).norm() > 1.0 + 1e-12)
        return std::string("softmax output norm exceeded one");
    }
    return std::string();
  });

  add("bound-tangent-dominance", [&] {
    Rng rng(opts.seed, 25);
    for (int i = 0; i < 300; ++i) {
      BoundInputs in;
      in.n = 1 + rng.below(500);
      in.lipschitz = 0.5 + rng.uniform();
      in.product_norm = 0.5 + rng.uniform();
      in.input_radius = 0.5 + rng.uniform();
      std::vector<double> kls;
      for (int k = 0; k < 3; ++k) {
        in.betas.push_back(0.1 + rng.uniform());
        in.gammas.push_back(0.1 + 2.0 * rng.uniform());
        kls.push_back(2.0 * rng.uniform());
      }
      double sqrt_form = 0.0;
      for (int k = 0; k < 3; ++k) sqrt_form += in.betas[k] * std::sqrt(kls[k]);
      sqrt_form *= in.chain_coeff() / std::sqrt(static_cast<double>(in.n));
      if (relaxed_objective(in, kls) < sqrt_form - 1e-12)
        return std::string("tangent line fell below the sqrt form");
    }
    return std::string();
  });

  add("bound-gamma-star-optimality", [&] {
    Rng rng(opts.seed, 26);
    for (int i = 0; i < 20; ++i) {
      BoundInputs in;
      in.n = 1 + rng.below(500);
      in.lipschitz = 1.0;
      in.product_norm = 1.0;
      in.input_radius = 1.0;
      for (int k = 0; k < 3; ++k) {
        in.betas.push_back(0.1 + rng.uniform());
        in.gammas.push_back(1.0);
        in.kl_terms.push_back(0.1 + 2.0 * rng.uniform());
      }
      const double optimized = excess_risk_bound(in).optimized;
      for (int j = 0; j < 200; ++j) {
        for (auto& g : in.gammas) g = 0.01 + 5.0 * rng.uniform();
        if (excess_risk_bound(in).bound < optimized - 1e-12)
          return std::string("a random gamma beat gamma-star");
      }
    }
    return std::string();
  });

  add("bound-monotonicity", [&] {
    Rng rng(opts.seed, 27);
    for (int i = 0; i < 300; ++i) {
      BoundInputs in;
      in.n = 1 + rng.below(500);
      in.lipschitz = 1.0;
      in.product_norm = 1.0;
      in.input_radius = 1.0;
      for (int k = 0; k < 2; ++k) {
        in.betas.push_back(0.1 + rng.uniform());
        in.gammas.push_back(0.1 + rng.uniform());
        in.mi_terms.push_back(rng.uniform());
        in.kl_terms.push_back(rng.uniform());
      }
      auto bigger = in;
      bigger.mi_terms[rng.below(2)] += 0.5;
      if (chained_generalization_bound(bigger) < chained_generalization_bound(in))
        return std::string("bound decreased in an information term");
      auto more_data = in;
      more_data.n = in.n * 4;
      if (chained_generalization_bound(more_data) > chained_generalization_bound(in))
        return std::string("bound increased with more data");
    }
    return std::string();
  });

  add("gibbs-excess-convexity", [&] {
    Rng rng(opts.seed, 28);
    for (int i = 0; i < 300; ++i) {
      const double sigma = 0.5 + rng.uniform();
      const std::size_t n = 10 + rng.below(500);
      const double kl = 2.0 * rng.uniform();
      const double g1 = 0.05 + 5.0 * rng.uniform(), g2 = 0.05 + 5.0 * rng.uniform();
      const double mid = gibbs_excess(sigma, n, 0.5 * (g1 + g2), kl).bound;
      if (mid > 0.5 * (gibbs_excess(sigma, n, g1, kl).bound +
                       gibbs_excess(sigma, n, g2, kl).bound) +
                    1e-12)
        return std::string("bound is not convex in gamma");
    }
    return std::string();
  });

  add("mc-ratio-exact", [&] {
    Rng rng(opts.seed, 29);
    // exhaustive conditional expectation must reproduce the integral ratio
    for (int i = 0; i < 50; ++i) {
      const double a2 = 0.5 + rng.uniform();
      std::vector<double> risk_cur(3), risk_hat(3), q2(3);
      for (int j = 0; j < 3; ++j) {
        risk_cur[j] = rng.uniform();
        risk_hat[j] = rng.uniform();
        q2[j] = 0.1 + rng.uniform();
      }
      double z_cur = 0.0, z_hat = 0.0;
      for (int j = 0; j < 3; ++j) {
        z_cur += std::exp(-risk_cur[j] / a2) * q2[j];
        z_hat += std::exp(-risk_hat[j] / a2) * q2[j];
      }
      double weighted = 0.0;
      for (int j = 0; j < 3; ++j)
        weighted += std::exp(-risk_cur[j] / a2) * q2[j] / z_cur *
                    std::exp((risk_cur[j] - risk_hat[j]) / a2);
      if (std::abs(weighted - z_hat / z_cur) > 1e-12)
        return std::string("estimator expectation differs from the exact ratio");
    }
    return std::string();
  });

  add("discrete-sampler-stationarity", [&] {
    std::vector<double> risk{0.0, 1.0, 1.0, 2.0};
    auto target = mt_solve(build_twisted_problem(
                               {FiniteJoint::uniform({2}), FiniteJoint::uniform({2, 2})},
                               TemperatureVector({2.0, 1.0}), risk))
                      .joint;
    DiscreteMultilevelConfig cfg{2.0, 1.0, 40000, 20, opts.seed, 0, 0};
    auto emp = discrete_multilevel_metropolis(cfg, risk, FiniteDistribution::uniform(2),
                                              FiniteDistribution::uniform(2));
    if (total_variation(emp, target) >= 0.08)
      return std::string("empirical joint far from the twisted posterior");
    return std::string();
  });

  add("gibbs-sampler-stationarity", [&] {
    std::vector<double> risk{0.0, 1.0, 1.0, 2.0};
    std::vector<double> w(4);
    for (std::size_t i = 0; i < 4; ++i) w[i] = std::exp(-risk[i]);
    auto target = FiniteDistribution::normalized(w);
    auto emp = discrete_gibbs_sampler(1.0, FiniteDistribution::uniform(4), risk, 60000,
                                      opts.seed);
    if (total_variation(emp, target) >= 0.02)
      return std::string("empirical law far from the Gibbs posterior");
    return std::string();
  });

  add("sampler-determinism", [&] {
    std::vector<LayerSpec> layers{LayerSpec(Eigen::MatrixXd::Identity(2, 2), 0.5),
                                  LayerSpec(Eigen::MatrixXd::Identity(2, 2), 0.5)};
    NetSpec spec(layers, OutputActivation::kSoftmax, 2.0);
    Dataset data;
    data.input_radius = 2.0;
    Rng rng(opts.seed, 30);
    for (int i = 0; i < 8; ++i) {
      Eigen::VectorXd x(2);
      x << rng.gaussian(), rng.gaussian();
      if (x.norm() > 2.0) x *= 2.0 / x.norm();
      Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
      y[i % 2] = 1.0;
      data.examples.push_back(Example{x, y});
    }
    SamplerConfig cfg{TemperatureVector({1.0, 1.0}), 100, 5, {0.05, 0.05},
                      opts.seed, NetParams::at_references(spec), 10};
    std::vector<LayerPrior> priors{flat_ball_prior(spec.layers[0]),
                                   flat_ball_prior(spec.layers[1])};
    auto t1 = multilevel_metropolis(cfg, data, spec, priors);
    auto t2 = multilevel_metropolis(cfg, data, spec, priors);
    if (t1.risk_trace != t2.risk_trace) return std::string("risk traces differ across runs");
    if (t1.outer.accepted != t2.outer.accepted) return std::string("acceptance differs");
    return std::string();
  });

  return results;
}

}  // namespace mlgibbs
