#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "mlgibbs/common.hpp"
#include "mlgibbs/dataset.hpp"
#include "mlgibbs/distributions.hpp"
#include "mlgibbs/net.hpp"
#include "mlgibbs/rng.hpp"

namespace mlgibbs {

struct MetropolisStats {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  double rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

template <class State>
struct MetropolisResult {
  std::vector<State> samples;
  MetropolisStats stats;
};

// Symmetric random-walk Metropolis. The log density may return -inf to mark
// states outside the support; such proposals are rejected outright, which
// preserves detailed balance on the truncated support.
template <class State, class LogDensity, class Proposer>
MetropolisResult<State> metropolis_chain(const LogDensity& log_density, const Proposer& propose,
                                         State init, std::size_t iters, Rng& rng) {
  double cur = log_density(init);
  if (cur == -kInfinity)
    throw PreconditionError("metropolis_chain: initial state outside support");
  MetropolisResult<State> out;
  out.samples.reserve(iters);
  State state = std::move(init);
  for (std::size_t t = 0; t < iters; ++t) {
    State prop = propose(state, rng);
    ++out.stats.proposed;
    const double lp = log_density(prop);
    if (lp > -kInfinity && std::log(rng.uniform_positive()) <= lp - cur) {
      state = std::move(prop);
      cur = lp;
      ++out.stats.accepted;
    }
    out.samples.push_back(state);
  }
  return out;
}

// Symmetric uniform proposal over a discrete axis. Deliberately includes
// the current cell: excluding it makes two-cell axes alternate
// deterministically under flat targets, and thinned records then alias the
// parity instead of the stationary law.
inline std::size_t propose_uniform(std::size_t n, Rng& rng) { return rng.below(n); }

inline FiniteDistribution empirical_distribution(std::span<const std::size_t> samples,
                                                 std::size_t support) {
  std::vector<double> counts(support, 0.0);
  for (std::size_t s : samples) counts.at(s) += 1.0;
  return FiniteDistribution::normalized(std::move(counts));
}

// ---------------------------------------------------------------------------
// Discrete validation samplers (desk-scale weight spaces, exact targets)
// ---------------------------------------------------------------------------

// Metropolis chain over a finite cell space targeting exp(-gamma risk) * prior.
inline FiniteDistribution discrete_gibbs_sampler(double gamma, const FiniteDistribution& prior,
                                                 std::span<const double> risk, std::size_t iters,
                                                 std::uint64_t seed, std::size_t init = 0,
                                                 MetropolisStats* stats_out = nullptr) {
  if (!(gamma >= 0.0)) throw DomainError("discrete_gibbs_sampler: gamma must be nonnegative");
  if (risk.size() != prior.size()) throw DimensionError("risk table size differs from prior");
  const std::size_t n = prior.size();
  auto log_density = [&](std::size_t i) {
    if (!(prior[i] > 0.0)) return -kInfinity;
    return -gamma * risk[i] + std::log(prior[i]);
  };
  auto propose = [n](std::size_t, Rng& r) { return propose_uniform(n, r); };
  Rng rng(seed, 0);
  auto res = metropolis_chain(log_density, propose, init, iters, rng);
  if (stats_out) *stats_out = res.stats;
  return empirical_distribution(res.samples, n);
}

// Inner-level chain over the second coordinate at fixed first coordinate:
// targets f(w1,.)^(1/a2) * prior2 through its log density.
inline std::vector<std::size_t> discrete_inner_chain(std::span<const double> risk_row, double a2,
                                                     const FiniteDistribution& prior2,
                                                     std::size_t steps, std::size_t init, Rng& rng,
                                                     MetropolisStats* stats_out = nullptr) {
  if (risk_row.size() != prior2.size())
    throw DimensionError("discrete_inner_chain: risk row size differs from prior");
  const std::size_t n = prior2.size();
  auto log_density = [&](std::size_t j) {
    if (!(prior2[j] > 0.0)) return -kInfinity;
    return -risk_row[j] / a2 + std::log(prior2[j]);
  };
  auto propose = [n](std::size_t, Rng& r) { return propose_uniform(n, r); };
  auto res = metropolis_chain(log_density, propose, init, steps, rng);
  if (stats_out) *stats_out = res.stats;
  return res.samples;
}

struct DiscreteMultilevelConfig {
  double a1 = 1.0;
  double a2 = 1.0;
  std::size_t outer_iters = 1;
  std::size_t inner_iters = 1;
  std::uint64_t seed = 0;
  std::size_t init1 = 0;
  std::size_t init2 = 0;
};

// Two-level Metropolis on a finite product space, used to validate the
// sampler against the exact twisted posterior. Returns the empirical joint
// of the recorded (w1, w2) sequence.
inline FiniteJoint discrete_multilevel_metropolis(const DiscreteMultilevelConfig& cfg,
                                                  const std::vector<double>& risk,
                                                  const FiniteDistribution& prior1,
                                                  const FiniteDistribution& prior2,
                                                  MetropolisStats* outer_stats = nullptr,
                                                  double* inner_rate = nullptr) {
  const std::size_t n1 = prior1.size(), n2 = prior2.size();
  if (risk.size() != n1 * n2)
    throw DimensionError("discrete_multilevel_metropolis: risk table shape mismatch");
  if (n1 * n2 > 64)
    throw DeskScaleError("discrete_multilevel_metropolis: validation harness capped at 64 cells");
  if (!(cfg.a1 > 0.0 && cfg.a2 > 0.0)) throw DomainError("temperatures must be positive");
  if (cfg.outer_iters < 1 || cfg.inner_iters < 1) throw DomainError("iteration counts must be >= 1");
  if (cfg.init1 >= n1 || cfg.init2 >= n2 || !(prior1[cfg.init1] > 0.0) ||
      !(prior2[cfg.init2] > 0.0))
    throw PreconditionError("initial state outside support");

  const double outer_pow = cfg.a2 / (cfg.a1 + cfg.a2);
  std::size_t w1 = cfg.init1, v2 = cfg.init2;
  std::vector<double> counts(n1 * n2, 0.0);
  MetropolisStats outer, inner;
  Rng outer_rng(cfg.seed, 0);

  for (std::size_t t = 1; t <= cfg.outer_iters; ++t) {
    const std::size_t hat = propose_uniform(n1, outer_rng);
    const bool hat_ok = prior1[hat] > 0.0;

    Rng inner_rng(cfg.seed, t);
    LogSumExp ratio_terms;
    for (std::size_t i = 0; i < cfg.inner_iters; ++i) {
      const std::size_t prop = propose_uniform(n2, inner_rng);
      ++inner.proposed;
      if (prior2[prop] > 0.0) {
        const double delta = (risk[w1 * n2 + v2] - risk[w1 * n2 + prop]) / cfg.a2 +
                             std::log(prior2[prop]) - std::log(prior2[v2]);
        if (std::log(inner_rng.uniform_positive()) <= delta) {
          v2 = prop;
          ++inner.accepted;
        }
      }
      if (hat_ok)
        ratio_terms.add((risk[w1 * n2 + v2] - risk[hat * n2 + v2]) / cfg.a2);
    }

    counts[w1 * n2 + v2] += 1.0;

    ++outer.proposed;
    if (hat_ok) {
      const double log_alpha = outer_pow * ratio_terms.log_mean() + std::log(prior1[hat]) -
                               std::log(prior1[w1]);
      if (std::log(outer_rng.uniform_positive()) <= log_alpha) {
        w1 = hat;
        ++outer.accepted;
      }
    }
  }
  if (outer_stats) *outer_stats = outer;
  if (inner_rate) *inner_rate = inner.rate();
  return FiniteJoint::normalized({n1, n2}, std::move(counts));
}

// ---------------------------------------------------------------------------
// Continuous chains over constrained nets
// ---------------------------------------------------------------------------

// log-density of a layer prior, up to an additive constant
using LayerPrior = std::function<double(const Eigen::MatrixXd&)>;

// uniform over the layer's constraint ball: 0 inside, -inf outside
inline LayerPrior flat_ball_prior(const LayerSpec& layer) {
  return [layer](const Eigen::MatrixXd& w) {
    return in_ball(w, layer) ? 0.0 : -kInfinity;
  };
}

struct SamplerConfig {
  TemperatureVector temps;
  std::size_t outer_iters;             // T
  std::size_t inner_iters;             // T'
  std::vector<double> proposal_scales; // per-layer std of the Gaussian walk
  std::uint64_t seed;
  NetParams init;
  std::size_t thin = 100;
};

struct ChainTrace {
  std::vector<double> risk_trace;                         // length T
  std::vector<std::pair<std::size_t, NetParams>> samples; // thinned (iteration, state)
  MetropolisStats outer;
  double accept_inner = 0.0;  // mean inner acceptance rate
  std::uint64_t seed = 0;
  NetParams final_params;
};

// Per-iteration view for trace writers: the recorded state of iteration t,
// its training risk, and the chain's running acceptance statistics (outer
// decisions made before t, inner rate over iterations up to t).
struct IterationUpdate {
  std::size_t iteration = 0;
  const NetParams& params;
  double train_risk = 0.0;
  std::size_t outer_accepted = 0;
  double inner_accept_rate = 0.0;
};

using IterationHook = std::function<void(const IterationUpdate&)>;

namespace detail {

inline Eigen::MatrixXd gaussian_step(const Eigen::MatrixXd& w, double scale, Rng& rng) {
  Eigen::MatrixXd out(w.rows(), w.cols());
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    for (Eigen::Index r = 0; r < w.rows(); ++r) out(r, c) = w(r, c) + scale * rng.gaussian();
  return out;
}

inline void check_sampler_config(const SamplerConfig& cfg, const NetSpec& spec) {
  if (cfg.outer_iters < 1 || cfg.inner_iters < 1)
    throw ConfigError("sampler: iteration counts must be >= 1");
  if (cfg.proposal_scales.size() != spec.depth())
    throw ConfigError("sampler: one proposal scale per layer required");
  for (double s : cfg.proposal_scales)
    if (!(s > 0.0)) throw ConfigError("sampler: proposal scales must be positive");
  if (cfg.thin < 1) throw ConfigError("sampler: thin must be >= 1");
  validate_params(spec, cfg.init);
}

}  // namespace detail

struct InnerChainResult {
  std::vector<Eigen::MatrixXd> samples;  // v2^(1..T')
  Eigen::MatrixXd last;
  MetropolisStats stats;
};

// Inner-level Metropolis over the second layer at fixed w1: targets
// f(w1,.)^(1/a2) * prior2, i.e. log density -risk(w1, v2)/a2 + log prior2.
inline InnerChainResult inner_conditional_chain(const Eigen::MatrixXd& w1, const Dataset& data,
                                                const NetSpec& spec, double a2,
                                                const LayerPrior& prior2, double scale,
                                                std::size_t t_prime, const Eigen::MatrixXd& init,
                                                Rng& rng) {
  if (spec.depth() != 2) throw ConfigError("inner_conditional_chain: two-layer nets only");
  if (!(a2 > 0.0)) throw DomainError("inner_conditional_chain: a2 must be positive");
  if (!in_ball(init, spec.layers[1]) || prior2(init) == -kInfinity)
    throw PreconditionError("inner_conditional_chain: initial state outside support");
  BatchEvaluator ev(spec, data);
  const Eigen::MatrixXd hidden = ev.hidden(w1);
  auto log_density = [&](const Eigen::MatrixXd& v2) {
    if (!in_ball(v2, spec.layers[1])) return -kInfinity;
    const double lp = prior2(v2);
    if (lp == -kInfinity) return -kInfinity;
    return -ev.risk_from_hidden(hidden, v2) / a2 + lp;
  };
  auto propose = [scale](const Eigen::MatrixXd& cur, Rng& r) {
    return detail::gaussian_step(cur, scale, r);
  };
  auto res = metropolis_chain(log_density, propose, init, t_prime, rng);
  InnerChainResult out;
  out.last = res.samples.back();
  out.samples = std::move(res.samples);
  out.stats = res.stats;
  return out;
}

// Monte-Carlo estimate of the integral ratio in log space:
// log A = logmeanexp_i ( (L_s(w1_cur, v2_i) - L_s(w1_prop, v2_i)) / a2 ).
inline double mc_log_ratio(const Eigen::MatrixXd& w1_prop, const Eigen::MatrixXd& w1_cur,
                           const std::vector<Eigen::MatrixXd>& inner_samples, const Dataset& data,
                           const NetSpec& spec, double a2) {
  if (inner_samples.empty()) throw DomainError("mc_ratio: need at least one inner sample");
  BatchEvaluator ev(spec, data);
  const Eigen::MatrixXd h_cur = ev.hidden(w1_cur);
  const Eigen::MatrixXd h_prop = ev.hidden(w1_prop);
  LogSumExp lse;
  for (const auto& v2 : inner_samples)
    lse.add((ev.risk_from_hidden(h_cur, v2) - ev.risk_from_hidden(h_prop, v2)) / a2);
  return lse.log_mean();
}

inline double mc_ratio(const Eigen::MatrixXd& w1_prop, const Eigen::MatrixXd& w1_cur,
                       const std::vector<Eigen::MatrixXd>& inner_samples, const Dataset& data,
                       const NetSpec& spec, double a2) {
  return std::exp(mc_log_ratio(w1_prop, w1_cur, inner_samples, data, spec, a2));
}

// Two-level Metropolis trainer. The outer chain walks the first layer with
// acceptance ratio A^(a2/(a1+a2)) * prior ratio; each outer iteration runs
// the inner chain from the previous w2 state and accumulates the A-estimate
// in the same pass, so memory does not grow with T'. Priors are the factors
// of a consistent product prior: Q(1) = q1, Q(2) = q1 x q2.
inline ChainTrace multilevel_metropolis(const SamplerConfig& cfg, const Dataset& data,
                                        const NetSpec& spec,
                                        const std::vector<LayerPrior>& priors,
                                        const IterationHook& hook = {}) {
  if (spec.depth() != 2) throw ConfigError("multilevel_metropolis: two-layer nets only");
  if (priors.size() != 2)
    throw ConfigError("multilevel_metropolis: need the two factors of a product prior");
  if (cfg.temps.size() != 2)
    throw ConfigError("multilevel_metropolis: temperature vector must have two entries");
  detail::check_sampler_config(cfg, spec);
  if (priors[0](cfg.init.weights[0]) == -kInfinity ||
      priors[1](cfg.init.weights[1]) == -kInfinity)
    throw PreconditionError("multilevel_metropolis: initial state has zero prior density");

  BatchEvaluator ev(spec, data);
  const double a1 = cfg.temps[0], a2 = cfg.temps[1];
  const double outer_pow = a2 / (a1 + a2);
  const double scale1 = cfg.proposal_scales[0], scale2 = cfg.proposal_scales[1];

  Eigen::MatrixXd w1 = cfg.init.weights[0];
  Eigen::MatrixXd v2 = cfg.init.weights[1];
  Eigen::MatrixXd h_cur = ev.hidden(w1);
  double lp1_cur = priors[0](w1);
  double lp2_cur = priors[1](v2);
  double risk_cur = ev.risk_from_hidden(h_cur, v2);  // risk of (w1, v2)

  Rng outer_rng(cfg.seed, 0);
  ChainTrace trace;
  trace.seed = cfg.seed;
  trace.risk_trace.reserve(cfg.outer_iters);
  MetropolisStats inner;

  for (std::size_t t = 1; t <= cfg.outer_iters; ++t) {
    Eigen::MatrixXd w1_hat = detail::gaussian_step(w1, scale1, outer_rng);
    double lp1_hat = -kInfinity;
    bool hat_ok = in_ball(w1_hat, spec.layers[0]);
    if (hat_ok) {
      lp1_hat = priors[0](w1_hat);
      hat_ok = lp1_hat > -kInfinity;
    }
    Eigen::MatrixXd h_hat;
    if (hat_ok) h_hat = ev.hidden(w1_hat);

    // inner chain at fixed w1, fused with the A-estimate terms
    Rng inner_rng(cfg.seed, t);
    LogSumExp ratio_terms;
    double risk_vs_hat = 0.0;  // risk of (w1_hat, v2), valid when hat_ok
    for (std::size_t i = 0; i < cfg.inner_iters; ++i) {
      Eigen::MatrixXd prop = detail::gaussian_step(v2, scale2, inner_rng);
      ++inner.proposed;
      if (in_ball(prop, spec.layers[1])) {
        const double lp2 = priors[1](prop);
        if (lp2 > -kInfinity) {
          const double risk_prop = ev.risk_from_hidden(h_cur, prop);
          const double delta = (risk_cur - risk_prop) / a2 + lp2 - lp2_cur;
          if (std::log(inner_rng.uniform_positive()) <= delta) {
            v2 = std::move(prop);
            risk_cur = risk_prop;
            lp2_cur = lp2;
            ++inner.accepted;
          }
        }
      }
      if (hat_ok) {
        risk_vs_hat = ev.risk_from_hidden(h_hat, v2);
        ratio_terms.add((risk_cur - risk_vs_hat) / a2);
      }
    }

    // (w1^(t), w2^(t)) is the recorded state of this iteration
    trace.risk_trace.push_back(risk_cur);
    if (t % cfg.thin == 0) trace.samples.emplace_back(t, NetParams{{w1, v2}});
    if (hook) {
      const NetParams state{{w1, v2}};
      hook(IterationUpdate{t, state, risk_cur, trace.outer.accepted, inner.rate()});
    }

    ++trace.outer.proposed;
    if (hat_ok) {
      const double log_alpha = outer_pow * ratio_terms.log_mean() + lp1_hat - lp1_cur;
      if (std::log(outer_rng.uniform_positive()) <= log_alpha) {
        w1 = std::move(w1_hat);
        h_cur = std::move(h_hat);
        lp1_cur = lp1_hat;
        risk_cur = risk_vs_hat;  // risk of (new w1, v2), from the last A-term
        ++trace.outer.accepted;
      }
    }
  }

  trace.accept_inner = inner.rate();
  trace.final_params = NetParams{{w1, v2}};
  return trace;
}

// Classical Gibbs-posterior baseline: one joint random-walk chain over all
// layers targeting exp(-gamma L_s(w)) * prior(w).
inline ChainTrace gibbs_sampler(double gamma, const std::vector<LayerPrior>& priors,
                                const Dataset& data, const NetSpec& spec,
                                const SamplerConfig& cfg, const IterationHook& hook = {}) {
  if (!(gamma >= 0.0)) throw DomainError("gibbs_sampler: gamma must be nonnegative");
  if (priors.size() != spec.depth()) throw ConfigError("gibbs_sampler: one prior per layer");
  detail::check_sampler_config(cfg, spec);

  BatchEvaluator ev(spec, data);
  NetParams state = cfg.init;
  double risk_cur = ev.risk(spec, state);
  double lp_cur = 0.0;
  for (std::size_t k = 0; k < spec.depth(); ++k) {
    const double lp = priors[k](state.weights[k]);
    if (lp == -kInfinity)
      throw PreconditionError("gibbs_sampler: initial state has zero prior density");
    lp_cur += lp;
  }

  Rng rng(cfg.seed, 0);
  ChainTrace trace;
  trace.seed = cfg.seed;
  trace.risk_trace.reserve(cfg.outer_iters);

  for (std::size_t t = 1; t <= cfg.outer_iters; ++t) {
    NetParams prop;
    prop.weights.reserve(spec.depth());
    for (std::size_t k = 0; k < spec.depth(); ++k)
      prop.weights.push_back(detail::gaussian_step(state.weights[k], cfg.proposal_scales[k], rng));
    ++trace.outer.proposed;

    bool ok = true;
    double lp_prop = 0.0;
    for (std::size_t k = 0; k < spec.depth() && ok; ++k) {
      if (!in_ball(prop.weights[k], spec.layers[k])) {
        ok = false;
        break;
      }
      const double lp = priors[k](prop.weights[k]);
      if (lp == -kInfinity)
        ok = false;
      else
        lp_prop += lp;
    }
    if (ok) {
      const double risk_prop = ev.risk(spec, prop);
      const double delta = -gamma * risk_prop + lp_prop - (-gamma * risk_cur + lp_cur);
      if (std::log(rng.uniform_positive()) <= delta) {
        state = std::move(prop);
        risk_cur = risk_prop;
        lp_cur = lp_prop;
        ++trace.outer.accepted;
      }
    }

    trace.risk_trace.push_back(risk_cur);
    if (t % cfg.thin == 0) trace.samples.emplace_back(t, state);
    if (hook) hook(IterationUpdate{t, state, risk_cur, trace.outer.accepted, 0.0});
  }
  trace.final_params = state;
  return trace;
}

// ---------------------------------------------------------------------------
// Average predictors for binary l1 classification over finite tables
// ---------------------------------------------------------------------------

struct BinaryDataset {
  std::vector<std::size_t> x_index;  // column of the hypothesis table
  std::vector<int> labels;           // each 0 or 1

  std::size_t size() const { return x_index.size(); }
};

namespace detail {

inline void check_binary_inputs(const Eigen::MatrixXd& values, const BinaryDataset& data,
                                const FiniteDistribution& prior) {
  if (static_cast<std::size_t>(values.rows()) != prior.size())
    throw DimensionError("hypothesis count differs from prior support");
  if (data.x_index.size() != data.labels.size() || data.size() == 0)
    throw DomainError("dataset must pair every point with a label");
  for (int y : data.labels)
    if (y != 0 && y != 1) throw DomainError("binary labels required");
  for (std::size_t i : data.x_index)
    if (i >= static_cast<std::size_t>(values.cols())) throw DimensionError("x index out of range");
  if ((values.array() < -1e-12).any() || (values.array() > 1.0 + 1e-12).any())
    throw DomainError("hypothesis values must lie in [0,1]");
}

}  // namespace detail

// exact Gibbs posterior over a finite hypothesis table under l1 loss
inline std::vector<double> gibbs_posterior_weights(const Eigen::MatrixXd& values,
                                                   const BinaryDataset& data, double gamma,
                                                   const FiniteDistribution& prior) {
  detail::check_binary_inputs(values, data, prior);
  if (!(gamma >= 0.0)) throw DomainError("gamma must be nonnegative");
  const std::size_t m = prior.size();
  std::vector<double> logw(m, -kInfinity);
  double maxw = -kInfinity;
  for (std::size_t w = 0; w < m; ++w) {
    if (!(prior[w] > 0.0)) continue;
    double risk = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
      risk += std::abs(values(static_cast<Eigen::Index>(w),
                              static_cast<Eigen::Index>(data.x_index[i])) -
                       static_cast<double>(data.labels[i]));
    risk /= static_cast<double>(data.size());
    logw[w] = -gamma * risk + std::log(prior[w]);
    maxw = std::max(maxw, logw[w]);
  }
  double z = 0.0;
  std::vector<double> out(m, 0.0);
  for (std::size_t w = 0; w < m; ++w)
    if (logw[w] != -kInfinity) z += (out[w] = std::exp(logw[w] - maxw));
  for (double& v : out) v /= z;
  return out;
}

// h_s(x) = sum_w P(w) h_w(x), the posterior-mean predictor over all columns
inline Eigen::VectorXd gibbs_average_predictor(const Eigen::MatrixXd& values,
                                               const BinaryDataset& data, double gamma,
                                               const FiniteDistribution& prior) {
  const auto weights = gibbs_posterior_weights(values, data, gamma, prior);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(values.cols());
  for (std::size_t w = 0; w < weights.size(); ++w)
    if (weights[w] > 0.0) out += weights[w] * values.row(static_cast<Eigen::Index>(w)).transpose();
  return out;
}

// Per-level hypothesis tables for the multilevel average predictor: row r of
// level_values[k-1] holds the predictor values of the projection fixing the
// first k components at prefix index r; reference_values is the depth-0
// projection (all layers at their references).
struct MultilevelHypotheses {
  std::vector<std::size_t> level_sizes;
  Eigen::VectorXd reference_values;
  std::vector<Eigen::MatrixXd> level_values;
};

// Mixture sum_k p_k h_S^(k) of per-level Gibbs average predictors over the
// rescaled difference classes, with p_k = beta_k / sum_i beta_i and inverse
// temperatures zeta_k = sqrt(n) / (gamma_k (sum_i beta_i) L M R).
inline Eigen::VectorXd multilevel_average_predictor(
    const MultilevelHypotheses& hyp, const BinaryDataset& data,
    const std::vector<double>& gammas, const std::vector<double>& betas, double lipschitz,
    double product_norm, double input_radius, const std::vector<FiniteDistribution>& priors) {
  const std::size_t d = hyp.level_sizes.size();
  if (d == 0 || hyp.level_values.size() != d || gammas.size() != d || betas.size() != d ||
      priors.size() != d)
    throw DimensionError("multilevel_average_predictor: per-level inputs must all have depth d");
  const auto points = hyp.reference_values.size();
  double beta_sum = 0.0;
  for (double b : betas) {
    if (!(b > 0.0)) throw DomainError("betas must be positive");
    beta_sum += b;
  }
  const double n = static_cast<double>(data.size());

  Eigen::VectorXd result = Eigen::VectorXd::Zero(points);
  std::size_t rows = 1;
  for (std::size_t k = 0; k < d; ++k) {
    rows *= hyp.level_sizes[k];
    const Eigen::MatrixXd& level = hyp.level_values[k];
    if (static_cast<std::size_t>(level.rows()) != rows || level.cols() != points)
      throw DimensionError("level table " + std::to_string(k + 1) + " has wrong shape");
    const double denom = 2.0 * betas[k] * product_norm * input_radius;
    Eigen::MatrixXd rescaled(level.rows(), points);
    for (Eigen::Index r = 0; r < level.rows(); ++r) {
      Eigen::RowVectorXd parent;
      if (k == 0)
        parent = hyp.reference_values.transpose();
      else
        parent = hyp.level_values[k - 1].row(r / static_cast<Eigen::Index>(hyp.level_sizes[k]));
      rescaled.row(r) = ((level.row(r) - parent).array() / denom + 0.5).matrix();
    }
    if ((rescaled.array() < -1e-9).any() || (rescaled.array() > 1.0 + 1e-9).any())
      throw InvariantError("rescaled hypothesis class leaves [0,1]; beta_k mis-scaled");
    rescaled = rescaled.cwiseMax(0.0).cwiseMin(1.0);
    const double zeta =
        std::sqrt(n) / (gammas[k] * beta_sum * lipschitz * product_norm * input_radius);
    result += (betas[k] / beta_sum) *
              gibbs_average_predictor(rescaled, data, zeta, priors[k]);
  }
  if ((result.array() < -1e-9).any() || (result.array() > 1.0 + 1e-9).any())
    throw InvariantError("multilevel average predictor leaves [0,1]");
  return result;
}

}  // namespace mlgibbs
