#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "mlgibbs/common.hpp"
#include "mlgibbs/distributions.hpp"

namespace mlgibbs {

// Constants and per-level information terms feeding the bound evaluators.
// Exactly one of mi_terms / kl_terms is typically set, depending on the
// bound; empty means absent.
struct BoundInputs {
  std::size_t n = 1;              // sample count
  double lipschitz = 0.0;         // L
  double product_norm = 0.0;      // M
  double input_radius = 0.0;      // R
  std::vector<double> betas;      // beta_1..beta_d
  std::vector<double> gammas;     // gamma_1..gamma_d
  std::vector<double> mi_terms;   // I(S; W_1..W_k), nats
  std::vector<double> kl_terms;   // D(delta_w || Q^(k)), nats

  double chain_coeff() const {  // C = L M R sqrt(2)
    return lipschitz * product_norm * input_radius * std::numbers::sqrt2;
  }

  void check_constants() const {
    if (n < 1) throw DomainError("bounds: n must be >= 1");
    if (!(lipschitz > 0.0) || !(product_norm > 0.0) || !(input_radius > 0.0))
      throw DomainError("bounds: constants L, M, R must be positive");
    if (betas.empty()) throw DomainError("bounds: betas are required");
    for (double b : betas)
      if (!(b > 0.0)) throw DomainError("bounds: betas must be positive");
  }

  void check_gammas() const {
    if (gammas.size() != betas.size())
      throw DimensionError("bounds: gammas must match betas in length");
    for (double g : gammas)
      if (!(g > 0.0)) throw DomainError("bounds: gammas must be positive");
  }
};

namespace detail {

inline void check_levels(const BoundInputs& inputs, const std::vector<double>& terms,
                         const char* name) {
  if (terms.size() != inputs.betas.size())
    throw DimensionError(std::string("bounds: ") + name + " must have one entry per level");
  for (double t : terms)
    if (!(t >= 0.0)) throw DomainError(std::string("bounds: ") + name + " must be nonnegative");
}

// sum_k beta_k (gamma_k x_k + 1/(4 gamma_k)), the tangent-line relaxation
inline double relaxed_sum(const BoundInputs& inputs, const std::vector<double>& terms) {
  double s = 0.0;
  for (std::size_t k = 0; k < inputs.betas.size(); ++k)
    s += inputs.betas[k] * (inputs.gammas[k] * terms[k] + 0.25 / inputs.gammas[k]);
  return s;
}

}  // namespace detail

// (L M R sqrt(2) / sqrt(n)) sum_k beta_k sqrt(I(S; W_1..W_k))
inline double chained_generalization_bound(const BoundInputs& inputs) {
  inputs.check_constants();
  if (inputs.mi_terms.empty()) throw DomainError("chained_generalization_bound: mi_terms are required");
  detail::check_levels(inputs, inputs.mi_terms, "mi_terms");
  double s = 0.0;
  for (std::size_t k = 0; k < inputs.betas.size(); ++k)
    s += inputs.betas[k] * std::sqrt(inputs.mi_terms[k]);
  return inputs.chain_coeff() / std::sqrt(static_cast<double>(inputs.n)) * s;
}

// (C / sqrt(n)) sum_k beta_k (gamma_k KL_k + 1/(4 gamma_k)) over per-level
// conditional divergences; tangent-line relaxation of the sqrt bound.
inline double relaxed_objective(const BoundInputs& inputs,
                                const std::vector<double>& conditional_kls) {
  inputs.check_constants();
  inputs.check_gammas();
  detail::check_levels(inputs, conditional_kls, "conditional_kls");
  return inputs.chain_coeff() / std::sqrt(static_cast<double>(inputs.n)) *
         detail::relaxed_sum(inputs, conditional_kls);
}

struct ExcessReport {
  double bound = 0.0;                    // at the supplied gammas
  std::vector<double> gamma_star;        // 1/(2 sqrt(KL_k)); +inf when KL_k = 0
  double optimized = 0.0;                // (C/sqrt(n)) sum_k beta_k sqrt(KL_k)
};

// Excess-risk bound over a discrete hypothesis space, with the per-level
// optimal gammas and the value they achieve.
inline ExcessReport excess_risk_bound(const BoundInputs& inputs) {
  inputs.check_constants();
  inputs.check_gammas();
  if (inputs.kl_terms.empty()) throw DomainError("excess_risk_bound: kl_terms are required");
  detail::check_levels(inputs, inputs.kl_terms, "kl_terms");
  const double scale = inputs.chain_coeff() / std::sqrt(static_cast<double>(inputs.n));
  ExcessReport report;
  report.bound = scale * detail::relaxed_sum(inputs, inputs.kl_terms);
  double opt = 0.0;
  for (std::size_t k = 0; k < inputs.betas.size(); ++k) {
    const double kl = inputs.kl_terms[k];
    report.gamma_star.push_back(kl > 0.0 ? 0.5 / std::sqrt(kl) : kInfinity);
    opt += inputs.betas[k] * std::sqrt(kl);
  }
  report.optimized = scale * opt;
  return report;
}

// Markov-threshold form: probability that the risk stays within epsilon of
// the best hypothesis, clamped to [0,1].
inline double high_prob_bound(const BoundInputs& inputs, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("high_prob_bound: epsilon must be positive");
  const double excess = excess_risk_bound(inputs).bound;
  double p = 1.0 - excess / epsilon;
  return std::min(1.0, std::max(0.0, p));
}

// Neighborhood form for non-discrete spaces: additive excess
// epsilon + (C/sqrt(n)) sum_k beta_k (gamma_k KL_k + 1/(4 gamma_k)).
inline double neighborhood_excess(const BoundInputs& inputs, double epsilon,
                                  const std::vector<double>& neighborhood_kls) {
  if (!(epsilon >= 0.0)) throw DomainError("neighborhood_excess: epsilon must be nonnegative");
  inputs.check_constants();
  inputs.check_gammas();
  detail::check_levels(inputs, neighborhood_kls, "neighborhood_kls");
  return epsilon + inputs.chain_coeff() / std::sqrt(static_cast<double>(inputs.n)) *
                       detail::relaxed_sum(inputs, neighborhood_kls);
}

struct GibbsExcessReport {
  double bound = 0.0;       // kl/gamma + gamma sigma^2 / (2n)
  double gamma_star = 0.0;  // sqrt(2 n kl) / sigma
  double optimized = 0.0;   // bound evaluated at gamma_star
};

// Excess-risk bound for the classical Gibbs posterior with subgaussian loss.
// gamma_star is the exact minimizer of the bound; optimized is the bound's
// value there (0 in the kl = 0 limit, where gamma_star sits on the boundary).
inline GibbsExcessReport gibbs_excess(double sigma, std::size_t n, double gamma, double kl) {
  if (!(sigma > 0.0)) throw DomainError("gibbs_excess: sigma must be positive");
  if (n < 1) throw DomainError("gibbs_excess: n must be >= 1");
  if (!(gamma > 0.0)) throw DomainError("gibbs_excess: gamma must be positive");
  if (!(kl >= 0.0)) throw DomainError("gibbs_excess: kl must be nonnegative");
  const double nn = static_cast<double>(n);
  GibbsExcessReport report;
  report.bound = kl / gamma + gamma * sigma * sigma / (2.0 * nn);
  report.gamma_star = std::sqrt(2.0 * nn * kl) / sigma;
  report.optimized = kl > 0.0 ? 2.0 * sigma * std::sqrt(kl / (2.0 * nn)) : 0.0;
  return report;
}

// closed-form KL between isotropic Gaussians with scales a and s
inline double gaussian_kl(double center_distance, double a, double s, std::size_t dim) {
  if (!(a > 0.0) || !(s > 0.0)) throw DomainError("gaussian_kl: scales must be positive");
  const double d = static_cast<double>(dim);
  return d * (std::log(s / a) + (a * a - s * s) / (2.0 * s * s)) +
         center_distance * center_distance / (2.0 * s * s);
}

// Excess-risk bound for uncountable spaces with rho-Lipschitz loss and an
// isotropic Gaussian prior: infimum over the smoothing scale a of
// a rho sqrt(dim) + KL(N(w_hat, a^2 I) || Q)/gamma, plus gamma sigma^2/(2n).
// The infimum is searched on a 200-point log grid over a in [1e-6, 1e3].
inline double gibbs_excess_continuous(double sigma, std::size_t n, double gamma, double rho,
                                      std::size_t dim, double prior_sigma,
                                      double center_distance) {
  if (!(sigma > 0.0) || !(prior_sigma > 0.0)) throw DomainError("scale parameters must be positive");
  if (n < 1) throw DomainError("n must be >= 1");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  if (!(rho >= 0.0)) throw DomainError("rho must be nonnegative");
  if (dim < 1) throw DomainError("dim must be >= 1");
  const double d = static_cast<double>(dim);
  const double tail = gamma * sigma * sigma / (2.0 * static_cast<double>(n));
  constexpr int kGridPoints = 200;
  const double lo = std::log(1e-6), hi = std::log(1e3);
  double best = kInfinity;
  for (int i = 0; i < kGridPoints; ++i) {
    const double a = std::exp(lo + (hi - lo) * static_cast<double>(i) / (kGridPoints - 1));
    const double value =
        a * rho * std::sqrt(d) + gaussian_kl(center_distance, a, prior_sigma, dim) / gamma;
    if (value < best) best = value;
  }
  return best + tail;
}

// Prefix mutual informations I(S; X_1..X_k) of a joint whose axis 0 indexes
// the training set; feeds chained_generalization_bound in the discrete pipeline.
inline std::vector<double> exact_mi_report(const FiniteJoint& joint) {
  if (joint.depth() < 2) throw DimensionError("exact_mi_report: need the S axis plus weights");
  const auto& sizes = joint.axis_sizes();
  std::vector<double> mi;
  mi.reserve(joint.depth() - 1);
  for (std::size_t k = 2; k <= joint.depth(); ++k) {
    FiniteJoint m = marginalize(joint, k);
    std::size_t prefix_cells = 1;
    for (std::size_t j = 1; j < k; ++j) prefix_cells *= sizes[j];
    FiniteJoint two_axis({sizes[0], prefix_cells}, m.probs());
    mi.push_back(mutual_information(two_axis));
  }
  return mi;
}

}  // namespace mlgibbs
