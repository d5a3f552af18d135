#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlgibbs/common.hpp"

namespace mlgibbs {

// Probability vector over an indexed finite support. Entries are
// nonnegative and sum to one within kMassTolerance; construction enforces
// both. All divergence operations below are pure functions on these values.
class FiniteDistribution {
 public:
  explicit FiniteDistribution(std::vector<double> probs) : p_(std::move(probs)) {
    if (p_.empty()) throw DimensionError("distribution needs a nonempty support");
    double sum = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0)) throw InvariantError("negative probability entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kMassTolerance)
      throw InvariantError("probabilities sum to " + std::to_string(sum) + ", not 1");
  }

  static FiniteDistribution uniform(std::size_t n) {
    return FiniteDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static FiniteDistribution dirac(std::size_t n, std::size_t at) {
    std::vector<double> p(n, 0.0);
    p.at(at) = 1.0;
    return FiniteDistribution(std::move(p));
  }

  // rescales nonnegative weights to total mass one
  static FiniteDistribution normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double v : weights) {
      if (!(v >= 0.0)) throw InvariantError("negative weight");
      sum += v;
    }
    if (!(sum > 0.0)) throw InvariantError("weights sum to zero");
    for (double& v : weights) v /= sum;
    return FiniteDistribution(std::move(weights));
  }

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& probs() const { return p_; }

 private:
  std::vector<double> p_;
};

// Dense probability tensor over a product of axes, row-major with axis 0
// outermost. Prefix marginals (axes 1..k) are therefore sums over
// contiguous blocks.
class FiniteJoint {
 public:
  FiniteJoint(std::vector<std::size_t> axis_sizes, std::vector<double> probs)
      : sizes_(std::move(axis_sizes)), p_(std::move(probs)) {
    if (sizes_.empty()) throw DimensionError("joint needs at least one axis");
    std::size_t cells = 1;
    for (std::size_t s : sizes_) {
      if (s == 0) throw DimensionError("zero-sized axis");
      cells *= s;
    }
    if (p_.size() != cells)
      throw DimensionError("tensor has " + std::to_string(p_.size()) + " cells, axes imply " +
                           std::to_string(cells));
    double sum = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0)) throw InvariantError("negative probability entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kMassTolerance)
      throw InvariantError("joint mass is " + std::to_string(sum) + ", not 1");
  }

  static FiniteJoint uniform(std::vector<std::size_t> axis_sizes) {
    std::size_t cells = 1;
    for (std::size_t s : axis_sizes) cells *= s;
    return FiniteJoint(std::move(axis_sizes),
                       std::vector<double>(cells, 1.0 / static_cast<double>(cells)));
  }

  static FiniteJoint normalized(std::vector<std::size_t> axis_sizes, std::vector<double> weights) {
    double sum = 0.0;
    for (double v : weights) {
      if (!(v >= 0.0)) throw InvariantError("negative weight");
      sum += v;
    }
    if (!(sum > 0.0)) throw InvariantError("weights sum to zero");
    for (double& v : weights) v /= sum;
    return FiniteJoint(std::move(axis_sizes), std::move(weights));
  }

  static FiniteJoint from_distribution(const FiniteDistribution& d) {
    return FiniteJoint({d.size()}, d.probs());
  }

  static FiniteJoint product(const FiniteDistribution& a, const FiniteDistribution& b) {
    std::vector<double> p(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) p[i * b.size() + j] = a[i] * b[j];
    return FiniteJoint({a.size(), b.size()}, std::move(p));
  }

  std::size_t depth() const { return sizes_.size(); }
  const std::vector<std::size_t>& axis_sizes() const { return sizes_; }
  std::size_t cell_count() const { return p_.size(); }
  double operator[](std::size_t flat) const { return p_[flat]; }
  const std::vector<double>& probs() const { return p_; }

  std::size_t flat_index(std::span<const std::size_t> idx) const {
    if (idx.size() != sizes_.size()) throw DimensionError("index rank mismatch");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < sizes_.size(); ++k) {
      if (idx[k] >= sizes_[k]) throw DimensionError("index out of range");
      flat = flat * sizes_[k] + idx[k];
    }
    return flat;
  }

  // the joint viewed as a plain distribution over its cells
  FiniteDistribution flatten() const { return FiniteDistribution(p_); }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<double> p_;
};

// Per-level positive coefficients a = (a_1, ..., a_d) weighting the
// prefix-marginal divergences.
class TemperatureVector {
 public:
  explicit TemperatureVector(std::vector<double> coeffs) : a_(std::move(coeffs)) {
    if (a_.empty()) throw DimensionError("temperature vector is empty");
    for (double v : a_)
      if (!(v > 0.0)) throw InvariantError("temperature coefficients must be positive");
  }
  std::size_t size() const { return a_.size(); }
  double operator[](std::size_t i) const { return a_[i]; }
  const std::vector<double>& coeffs() const { return a_; }

 private:
  std::vector<double> a_;
};

// Table of conditional distributions: one row (a valid distribution over
// out_size outcomes) per conditioning cell.
class Conditional {
 public:
  Conditional(std::size_t given_count, std::size_t out_size, std::vector<double> probs)
      : given_(given_count), out_(out_size), p_(std::move(probs)) {
    if (given_ == 0 || out_ == 0) throw DimensionError("empty conditional");
    if (p_.size() != given_ * out_) throw DimensionError("conditional table size mismatch");
    for (std::size_t g = 0; g < given_; ++g) {
      double sum = 0.0;
      for (std::size_t j = 0; j < out_; ++j) {
        double v = p_[g * out_ + j];
        if (!(v >= 0.0)) throw InvariantError("negative conditional probability");
        sum += v;
      }
      if (std::abs(sum - 1.0) > kMassTolerance)
        throw InvariantError("conditional row " + std::to_string(g) + " not normalized");
    }
  }

  std::size_t given_count() const { return given_; }
  std::size_t out_size() const { return out_; }
  double at(std::size_t given, std::size_t out) const { return p_[given * out_ + out]; }
  FiniteDistribution row(std::size_t given) const {
    return FiniteDistribution(
        std::vector<double>(p_.begin() + static_cast<std::ptrdiff_t>(given * out_),
                            p_.begin() + static_cast<std::ptrdiff_t>((given + 1) * out_)));
  }

 private:
  std::size_t given_, out_;
  std::vector<double> p_;
};

namespace detail {

// KL divergence on raw mass vectors; +inf when absolute continuity fails.
inline double relative_entropy_raw(std::span<const double> p, std::span<const double> q) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      if (!(q[i] > 0.0)) return kInfinity;
      sum += p[i] * std::log(p[i] / q[i]);
    }
  }
  // rounding can push a mathematically zero sum a hair below zero
  if (sum < 0.0 && sum > -1e-9) sum = 0.0;
  return sum;
}

}  // namespace detail

inline double relative_entropy(const FiniteDistribution& p, const FiniteDistribution& q) {
  if (p.size() != q.size()) throw DimensionError("relative_entropy: support sizes differ");
  return detail::relative_entropy_raw(p.probs(), q.probs());
}

inline double relative_entropy(const FiniteJoint& p, const FiniteJoint& q) {
  if (p.axis_sizes() != q.axis_sizes()) throw DimensionError("relative_entropy: axes differ");
  return detail::relative_entropy_raw(p.probs(), q.probs());
}

// D(P_{Y|X} || Q_{Y|X} | P_X): conditioning values with zero mass under p_x
// contribute nothing, even when their row divergence is infinite.
inline double conditional_relative_entropy(const Conditional& p_cond, const Conditional& q_cond,
                                           const FiniteDistribution& p_x) {
  if (p_cond.given_count() != q_cond.given_count() || p_cond.out_size() != q_cond.out_size())
    throw DimensionError("conditional_relative_entropy: table shapes differ");
  if (p_x.size() != p_cond.given_count())
    throw DimensionError("conditional_relative_entropy: conditioning support mismatch");
  double sum = 0.0;
  for (std::size_t x = 0; x < p_x.size(); ++x) {
    if (p_x[x] == 0.0) continue;
    double d = relative_entropy(p_cond.row(x), q_cond.row(x));
    if (d == kInfinity) return kInfinity;
    sum += p_x[x] * d;
  }
  return sum;
}

// Renyi divergence of order alpha; interpolates to the relative entropy at
// alpha = 1. Computed in log space.
inline double renyi_divergence(const FiniteDistribution& p, const FiniteDistribution& q,
                               double alpha) {
  if (p.size() != q.size()) throw DimensionError("renyi_divergence: support sizes differ");
  if (!(alpha > 0.0)) throw DomainError("renyi_divergence: order must be positive");
  if (alpha == 1.0) return relative_entropy(p, q);
  LogSumExp lse;
  bool any = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      if (alpha > 1.0) return kInfinity;
      continue;
    }
    lse.add(alpha * std::log(p[i]) + (1.0 - alpha) * std::log(q[i]));
    any = true;
  }
  if (!any) return kInfinity;  // mutually singular, alpha < 1
  double d = lse.value() / (alpha - 1.0);
  if (d < 0.0 && d > -1e-9) d = 0.0;
  return d;
}

inline double renyi_divergence(const FiniteJoint& p, const FiniteJoint& q, double alpha) {
  if (p.axis_sizes() != q.axis_sizes()) throw DimensionError("renyi_divergence: axes differ");
  return renyi_divergence(p.flatten(), q.flatten(), alpha);
}

namespace detail {

inline std::vector<double> tilt_raw(std::span<const double> p, std::span<const double> q,
                                    double lambda) {
  std::vector<double> logw(p.size(), -kInfinity);
  double maxw = -kInfinity;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && q[i] > 0.0) {
      logw[i] = lambda * std::log(p[i]) + (1.0 - lambda) * std::log(q[i]);
      maxw = std::max(maxw, logw[i]);
    }
  }
  if (maxw == -kInfinity)
    throw SingularTiltError("tilt undefined: inputs are mutually singular");
  double z = 0.0;
  for (double w : logw) z += std::exp(w - maxw);
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::exp(logw[i] - maxw) / z;
  return out;
}

}  // namespace detail

// Geometric mixture p^lambda q^(1-lambda), renormalized. Traverses from q
// to p as lambda runs 0 -> 1; the endpoints return the inputs exactly.
inline FiniteDistribution tilt(const FiniteDistribution& p, const FiniteDistribution& q,
                               double lambda) {
  if (p.size() != q.size()) throw DimensionError("tilt: support sizes differ");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("tilt: weight outside [0,1]");
  if (lambda == 0.0) return q;
  if (lambda == 1.0) return p;
  return FiniteDistribution(detail::tilt_raw(p.probs(), q.probs(), lambda));
}

inline FiniteJoint tilt(const FiniteJoint& p, const FiniteJoint& q, double lambda) {
  if (p.axis_sizes() != q.axis_sizes()) throw DimensionError("tilt: axes differ");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("tilt: weight outside [0,1]");
  if (lambda == 0.0) return q;
  if (lambda == 1.0) return p;
  return FiniteJoint(p.axis_sizes(), detail::tilt_raw(p.probs(), q.probs(), lambda));
}

// sums out axes k+1..d, keeping the first keep_axes axes
inline FiniteJoint marginalize(const FiniteJoint& j, std::size_t keep_axes) {
  const auto& sizes = j.axis_sizes();
  if (keep_axes < 1 || keep_axes > sizes.size())
    throw DimensionError("marginalize: prefix length out of range");
  if (keep_axes == sizes.size()) return j;
  std::size_t prefix_cells = 1;
  for (std::size_t k = 0; k < keep_axes; ++k) prefix_cells *= sizes[k];
  const std::size_t block = j.cell_count() / prefix_cells;
  std::vector<double> out(prefix_cells, 0.0);
  for (std::size_t c = 0; c < prefix_cells; ++c) {
    double s = 0.0;
    for (std::size_t b = 0; b < block; ++b) s += j[c * block + b];
    out[c] = s;
  }
  return FiniteJoint(std::vector<std::size_t>(sizes.begin(),
                                              sizes.begin() + static_cast<std::ptrdiff_t>(keep_axes)),
                     std::move(out));
}

// Chain factorization S_{X_1}, S_{X_2|X_1}, ..., S_{X_d|X_1..X_{d-1}}.
// Conditionals at zero-mass conditioning cells are set uniform, which keeps
// the factorization total; recomposition reproduces the joint on every cell
// whose prefix has positive mass.
inline std::vector<Conditional> chain_factorize(const FiniteJoint& j) {
  const auto& sizes = j.axis_sizes();
  const std::size_t d = sizes.size();
  std::vector<FiniteJoint> prefix;
  prefix.reserve(d);
  for (std::size_t k = 1; k <= d; ++k) prefix.push_back(marginalize(j, k));

  std::vector<Conditional> factors;
  factors.reserve(d);
  std::size_t given = 1;
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t out = sizes[k];
    std::vector<double> table(given * out, 0.0);
    for (std::size_t g = 0; g < given; ++g) {
      double parent = 1.0;
      if (k > 0) parent = prefix[k - 1][g];
      if (parent > 0.0) {
        for (std::size_t x = 0; x < out; ++x) table[g * out + x] = prefix[k][g * out + x] / parent;
        // guard against rounding drift in the row sum
        double s = 0.0;
        for (std::size_t x = 0; x < out; ++x) s += table[g * out + x];
        for (std::size_t x = 0; x < out; ++x) table[g * out + x] /= s;
      } else {
        for (std::size_t x = 0; x < out; ++x) table[g * out + x] = 1.0 / static_cast<double>(out);
      }
    }
    factors.emplace_back(given, out, std::move(table));
    given *= out;
  }
  return factors;
}

// multiplies a chain of conditionals back into the joint they factorize
inline FiniteJoint recompose(const std::vector<Conditional>& factors) {
  if (factors.empty()) throw DimensionError("recompose: no factors");
  std::vector<std::size_t> sizes;
  sizes.reserve(factors.size());
  for (const auto& f : factors) sizes.push_back(f.out_size());
  std::size_t cells = 1;
  for (std::size_t s : sizes) cells *= s;
  std::vector<double> p(cells, 1.0);
  std::size_t given = 1;    // cells of the prefix before this factor
  std::size_t block = cells;  // cells governed by one (given, out) entry
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const std::size_t out = factors[k].out_size();
    if (factors[k].given_count() != given) throw DimensionError("recompose: factor shape mismatch");
    block /= out;
    for (std::size_t c = 0; c < cells; ++c) {
      const std::size_t g = c / (block * out);
      const std::size_t x = (c / block) % out;
      p[c] *= factors[k].at(g, x);
    }
    given *= out;
  }
  return FiniteJoint(std::move(sizes), std::move(p));
}

// weighted sum of prefix-marginal relative entropies
inline double multilevel_relative_entropy(const FiniteJoint& p, const FiniteJoint& q,
                                          const TemperatureVector& a) {
  if (p.axis_sizes() != q.axis_sizes())
    throw DimensionError("multilevel_relative_entropy: axes differ");
  if (a.size() != p.depth())
    throw DimensionError("multilevel_relative_entropy: coefficient count differs from depth");
  double sum = 0.0;
  for (std::size_t i = 1; i <= p.depth(); ++i) {
    double d = relative_entropy(marginalize(p, i), marginalize(q, i));
    if (d == kInfinity) return kInfinity;
    sum += a[i - 1] * d;
  }
  return sum;
}

// I(X;Y) = D(P_XY || P_X x P_Y) for a two-axis joint
inline double mutual_information(const FiniteJoint& j) {
  if (j.depth() != 2) throw DimensionError("mutual_information: joint must have two axes");
  const std::size_t nx = j.axis_sizes()[0], ny = j.axis_sizes()[1];
  std::vector<double> px(nx, 0.0), py(ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      px[x] += j[x * ny + y];
      py[y] += j[x * ny + y];
    }
  double sum = 0.0;
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      double v = j[x * ny + y];
      if (v > 0.0) sum += v * std::log(v / (px[x] * py[y]));
    }
  if (sum < 0.0 && sum > -1e-9) sum = 0.0;
  return sum;
}

// half the l1 distance between two probability vectors
inline double total_variation(const FiniteDistribution& p, const FiniteDistribution& q) {
  if (p.size() != q.size()) throw DimensionError("total_variation: support sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

inline double total_variation(const FiniteJoint& p, const FiniteJoint& q) {
  return total_variation(p.flatten(), q.flatten());
}

}  // namespace mlgibbs
