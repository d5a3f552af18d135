#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mlgibbs/common.hpp"
#include "mlgibbs/net.hpp"
#include "mlgibbs/rng.hpp"

namespace mlgibbs {

struct Dataset {
  std::vector<Example> examples;
  double input_radius = 0.0;  // R; every |x|_2 is within this + 1e-9

  std::size_t size() const { return examples.size(); }
};

inline bool is_one_hot(const Eigen::VectorXd& y) {
  int ones = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 1.0)
      ++ones;
    else if (y[i] != 0.0)
      return false;
  }
  return ones == 1;
}

inline void validate_example(const Example& ex, double input_radius) {
  if (ex.x.norm() > input_radius + 1e-9)
    throw InvariantError("example input norm exceeds the instance radius");
  if (!is_one_hot(ex.y) && ex.y.norm() > 1.0 + 1e-9)
    throw InvariantError("label is neither one-hot nor inside the unit ball");
}

inline void validate_dataset(const Dataset& data) {
  for (const auto& ex : data.examples) validate_example(ex, data.input_radius);
}

enum class SynthLabels { kTeacher, kRandom };

// Reproducible synthetic dataset: inputs drawn Gaussian (scaled, so a zero
// scale yields constant-loss data) then projected into the radius-R ball;
// labels either produced by a teacher net evaluated on each input, or
// one-hot at a uniformly random class.
inline Dataset synth_dataset(const NetSpec& spec, std::size_t n, std::uint64_t seed,
                             SynthLabels labels, const NetParams* teacher = nullptr,
                             double input_scale = 1.0) {
  if (n < 1) throw DomainError("synth_dataset: need at least one example");
  if (!(input_scale >= 0.0)) throw DomainError("synth_dataset: negative input scale");
  if (labels == SynthLabels::kTeacher && teacher == nullptr)
    throw ConfigError("synth_dataset: teacher labels need teacher params");
  Rng rng(seed, 0);
  Dataset data;
  data.input_radius = spec.input_radius;
  data.examples.reserve(n);
  const auto in = static_cast<Eigen::Index>(spec.input_dim());
  const auto out = static_cast<Eigen::Index>(spec.output_dim());
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd x(in);
    for (Eigen::Index j = 0; j < in; ++j) x[j] = input_scale * rng.gaussian();
    const double norm = x.norm();
    if (norm > spec.input_radius) x *= spec.input_radius / norm;
    Eigen::VectorXd y;
    if (labels == SynthLabels::kTeacher) {
      y = forward(spec, *teacher, x);
    } else {
      y = Eigen::VectorXd::Zero(out);
      y[static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(out)))] = 1.0;
    }
    data.examples.push_back(Example{std::move(x), std::move(y)});
  }
  return data;
}

// Dataset packed into matrices for batched risk evaluation. For two-layer
// nets the first-layer activation can be cached per w_1 and reused across
// every inner-chain step, which is where almost all the training time goes.
class BatchEvaluator {
 public:
  BatchEvaluator(const NetSpec& spec, const Dataset& data)
      : act_(spec.output_activation), n_(data.size()) {
    if (data.size() == 0) throw DomainError("BatchEvaluator: empty dataset");
    inputs_.resize(static_cast<Eigen::Index>(spec.input_dim()), static_cast<Eigen::Index>(n_));
    labels_.resize(static_cast<Eigen::Index>(spec.output_dim()), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
      inputs_.col(static_cast<Eigen::Index>(i)) = data.examples[i].x;
      labels_.col(static_cast<Eigen::Index>(i)) = data.examples[i].y;
    }
  }

  std::size_t size() const { return n_; }

  // relu(W1 X), cached by callers while w1 stays fixed
  Eigen::MatrixXd hidden(const Eigen::MatrixXd& w1) const {
    return (w1 * inputs_).cwiseMax(0.0);
  }

  // mean squared-l2 loss of a two-layer net given its cached hidden layer
  double risk_from_hidden(const Eigen::MatrixXd& hidden, const Eigen::MatrixXd& w2) const {
    Eigen::MatrixXd z = w2 * hidden;
    apply_output(z);
    return (z - labels_).colwise().squaredNorm().sum() / static_cast<double>(n_);
  }

  // fraction of columns whose argmax differs from the label argmax
  double misclassification_from_hidden(const Eigen::MatrixXd& hidden,
                                       const Eigen::MatrixXd& w2) const {
    Eigen::MatrixXd z = w2 * hidden;
    std::size_t wrong = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      Eigen::Index zi, yi;
      z.col(c).maxCoeff(&zi);
      labels_.col(c).maxCoeff(&yi);
      if (zi != yi) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(n_);
  }

  // full batched risk for nets of any depth
  double risk(const NetSpec& spec, const NetParams& params) const {
    Eigen::MatrixXd h = inputs_;
    for (std::size_t k = 0; k + 1 < spec.depth(); ++k)
      h = (params.weights[k] * h).cwiseMax(0.0);
    return risk_from_hidden(h, params.weights.back());
  }

  double misclassification(const NetSpec& spec, const NetParams& params) const {
    Eigen::MatrixXd h = inputs_;
    for (std::size_t k = 0; k + 1 < spec.depth(); ++k)
      h = (params.weights[k] * h).cwiseMax(0.0);
    return misclassification_from_hidden(h, params.weights.back());
  }

 private:
  void apply_output(Eigen::MatrixXd& z) const {
    if (act_ == OutputActivation::kSoftmax) {
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double m = z.col(c).maxCoeff();
        z.col(c) = (z.col(c).array() - m).exp();
        z.col(c) /= z.col(c).sum();
      }
    }
  }

  OutputActivation act_;
  std::size_t n_;
  Eigen::MatrixXd inputs_;  // input_dim x n
  Eigen::MatrixXd labels_;  // output_dim x n
};

}  // namespace mlgibbs
