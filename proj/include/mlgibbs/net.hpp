#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "mlgibbs/common.hpp"

namespace mlgibbs {

enum class OutputActivation { kSoftmax, kIdentity };

// Largest singular value by power iteration on A^T A, started from the
// normalized all-ones vector so repeated calls are reproducible. A zero
// matrix returns 0.
inline double spectral_norm(const Eigen::MatrixXd& A, double tol = 1e-10, int max_iter = 1000) {
  if (!(tol > 0.0)) throw DomainError("spectral_norm: tolerance must be positive");
  if (A.size() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(A.cols());
  v /= v.norm();
  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd u = A * v;
    const double estimate = u.norm();  // |Av| with |v| = 1
    if (estimate == 0.0) return 0.0;
    Eigen::VectorXd w = A.transpose() * u;
    const double wn = w.norm();
    if (wn == 0.0) return estimate;
    v = w / wn;
    if (std::abs(estimate - sigma) <= tol * std::max(estimate, 1e-300)) return estimate;
    sigma = estimate;
  }
  return sigma;
}

// One layer of the constrained net: the reference matrix M_k and the
// radius alpha_k of the spectral ball around it.
struct LayerSpec {
  Eigen::MatrixXd reference;
  double radius;
  double reference_norm;  // cached |M_k|_2

  LayerSpec(Eigen::MatrixXd reference_in, double radius_in)
      : reference(std::move(reference_in)), radius(radius_in),
        reference_norm(spectral_norm(reference)) {
    if (!(radius > 0.0)) throw InvariantError("layer radius must be positive");
    if (!(reference_norm > 0.0)) throw InvariantError("reference matrix must have positive norm");
  }

  std::size_t in_dim() const { return static_cast<std::size_t>(reference.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(reference.rows()); }
  double ball_bound() const { return radius * reference_norm; }
};

// identity-pattern rectangular matrix: ones on the main diagonal
inline Eigen::MatrixXd identity_pattern(std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                            static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows() && i < m.cols(); ++i) m(i, i) = 1.0;
  return m;
}

struct NetSpec {
  std::vector<LayerSpec> layers;
  OutputActivation output_activation;
  double input_radius;  // R

  NetSpec(std::vector<LayerSpec> layers_in, OutputActivation act, double input_radius_in)
      : layers(std::move(layers_in)), output_activation(act), input_radius(input_radius_in) {
    if (layers.size() < 2) throw InvariantError("net needs at least two layers");
    if (!(input_radius > 0.0)) throw InvariantError("input radius must be positive");
    for (std::size_t k = 1; k < layers.size(); ++k)
      if (layers[k].in_dim() != layers[k - 1].out_dim())
        throw DimensionError("layer " + std::to_string(k + 1) + " input dim mismatch");
  }

  std::size_t depth() const { return layers.size(); }
  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }

  std::vector<double> alphas() const {
    std::vector<double> a;
    a.reserve(layers.size());
    for (const auto& l : layers) a.push_back(l.radius);
    return a;
  }
};

struct NetParams {
  std::vector<Eigen::MatrixXd> weights;

  static NetParams at_references(const NetSpec& spec) {
    NetParams p;
    p.weights.reserve(spec.depth());
    for (const auto& l : spec.layers) p.weights.push_back(l.reference);
    return p;
  }
};

struct Example {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

// membership in the closed spectral ball |W - M_k|_2 <= alpha_k |M_k|_2,
// with additive kBallTolerance slack. The Frobenius norm gives cheap
// certificates on both sides before falling back to power iteration.
inline bool in_ball(const Eigen::MatrixXd& W, const LayerSpec& layer) {
  if (W.rows() != layer.reference.rows() || W.cols() != layer.reference.cols())
    throw DimensionError("in_ball: matrix shape differs from layer reference");
  const Eigen::MatrixXd dev = W - layer.reference;
  const double bound = layer.ball_bound() + kBallTolerance;
  const double frob = dev.norm();
  if (frob <= bound) return true;  // |A|_2 <= |A|_F
  const double rank_cap = std::sqrt(static_cast<double>(std::min(dev.rows(), dev.cols())));
  if (frob > bound * rank_cap) return false;  // |A|_F <= sqrt(rank) |A|_2
  return spectral_norm(dev) <= bound;
}

inline void validate_params(const NetSpec& spec, const NetParams& params) {
  if (params.weights.size() != spec.depth())
    throw DimensionError("params depth differs from spec");
  for (std::size_t k = 0; k < spec.depth(); ++k)
    if (!in_ball(params.weights[k], spec.layers[k]))
      throw PreconditionError("weight matrix " + std::to_string(k + 1) +
                              " outside its constraint ball");
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

inline Eigen::VectorXd forward(const NetSpec& spec, const NetParams& params,
                               const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != spec.input_dim())
    throw DimensionError("forward: input dimension mismatch");
  if (params.weights.size() != spec.depth()) throw DimensionError("forward: params depth mismatch");
  Eigen::VectorXd h = x;
  for (std::size_t k = 0; k + 1 < spec.depth(); ++k)
    h = (params.weights[k] * h).cwiseMax(0.0);
  Eigen::VectorXd z = params.weights.back() * h;
  if (spec.output_activation == OutputActivation::kSoftmax) return softmax(z);
  return z;
}

// squared l2 loss |h_w(x) - y|^2
inline double loss(const NetSpec& spec, const NetParams& params, const Example& example) {
  if (example.y.size() != static_cast<Eigen::Index>(spec.output_dim()))
    throw DimensionError("loss: label dimension mismatch");
  return (forward(spec, params, example.x) - example.y).squaredNorm();
}

inline double empirical_risk(const NetSpec& spec, const NetParams& params,
                             const std::vector<Example>& dataset) {
  if (dataset.empty()) throw DomainError("empirical_risk: empty dataset");
  double sum = 0.0;
  for (const auto& ex : dataset) sum += loss(spec, params, ex);
  return sum / static_cast<double>(dataset.size());
}

// beta_k = alpha_k * exp(sum_{i<k} alpha_i), k is 1-based
inline double beta(const std::vector<double>& alphas, std::size_t k) {
  if (k < 1 || k > alphas.size()) throw DomainError("beta: level out of range");
  for (double a : alphas)
    if (!(a > 0.0)) throw DomainError("beta: radii must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) s += alphas[i];
  return alphas[k - 1] * std::exp(s);
}

struct NetConstants {
  double product_norm;  // M = prod |M_j|_2
  double lipschitz;     // L
  double chain_coeff;   // C = L M R sqrt(2)
};

inline NetConstants constants(const NetSpec& spec) {
  double m = 1.0;
  for (const auto& l : spec.layers) m *= l.reference_norm;
  double alpha_sum = 0.0;
  for (const auto& l : spec.layers) alpha_sum += l.radius;
  double lip;
  if (spec.output_activation == OutputActivation::kSoftmax)
    lip = 4.0;
  else
    lip = 2.0 + 2.0 * std::exp(alpha_sum) * m * spec.input_radius;
  return NetConstants{m, lip, lip * m * spec.input_radius * std::numbers::sqrt2};
}

// |h_{w1}(x) - h_{w2}(x)| where w1 carries W_k and w2 carries M_k at depth
// k = prefix.size() + 1, both padded with references beyond k.
inline double link_gap(const NetSpec& spec, const std::vector<Eigen::MatrixXd>& prefix,
                       const Eigen::MatrixXd& w_k, const Eigen::VectorXd& x) {
  const std::size_t k = prefix.size();  // 0-based level of the varied layer
  if (k >= spec.depth()) throw DimensionError("link_gap: prefix too long");
  for (std::size_t i = 0; i < k; ++i)
    if (!in_ball(prefix[i], spec.layers[i]))
      throw PreconditionError("link_gap: prefix matrix " + std::to_string(i + 1) +
                              " outside its ball");
  if (!in_ball(w_k, spec.layers[k]))
    throw PreconditionError("link_gap: varied matrix outside its ball");

  NetParams a = NetParams::at_references(spec);
  NetParams b = NetParams::at_references(spec);
  for (std::size_t i = 0; i < k; ++i) {
    a.weights[i] = prefix[i];
    b.weights[i] = prefix[i];
  }
  a.weights[k] = w_k;
  return (forward(spec, a, x) - forward(spec, b, x)).norm();
}

}  // namespace mlgibbs
