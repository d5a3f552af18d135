#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlgibbs {

// Absolute tolerance for probability-mass normalization checks.
inline constexpr double kMassTolerance = 1e-12;

// Additive slack for closed-ball membership, so states exactly on the
// boundary are not rejected by rounding.
inline constexpr double kBallTolerance = 1e-9;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched sizes / axis counts between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Scalar argument outside its admissible range.
struct DomainError : Error {
  using Error::Error;
};

// A value violated a structural invariant (mass, normalization, range).
struct InvariantError : Error {
  using Error::Error;
};

// Tilting two mutually singular distributions at an interior weight.
struct SingularTiltError : Error {
  using Error::Error;
};

// Exhaustive oracles refuse problems beyond desk scale.
struct DeskScaleError : Error {
  using Error::Error;
};

// Initial state (or another required precondition) outside the support.
struct PreconditionError : Error {
  using Error::Error;
};

// Malformed binary input (IDX files).
struct FormatError : Error {
  using Error::Error;
};

// Malformed text input; carries a 1-based line number.
struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

// Invalid run configuration.
struct ConfigError : Error {
  using Error::Error;
};

inline double log_sum_exp(std::span<const double> terms) {
  double m = -kInfinity;
  for (double t : terms) m = std::max(m, t);
  if (m == -kInfinity) return -kInfinity;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

// Streaming log-sum-exp accumulator; keeps the running maximum and the sum
// of shifted exponentials so no term is ever exponentiated unshifted.
class LogSumExp {
 public:
  void add(double term) {
    if (term == -kInfinity) {
      ++count_;
      return;
    }
    if (term > max_) {
      if (max_ != -kInfinity) sum_ *= std::exp(max_ - term);
      max_ = term;
      sum_ += 1.0;
    } else {
      sum_ += std::exp(term - max_);
    }
    ++count_;
  }
  // log of the sum of exp(term) over all added terms
  double value() const {
    if (max_ == -kInfinity) return -kInfinity;
    return max_ + std::log(sum_);
  }
  // log of the mean
  double log_mean() const {
    if (count_ == 0) return -kInfinity;
    return value() - std::log(static_cast<double>(count_));
  }
  std::size_t count() const { return count_; }

 private:
  double max_ = -kInfinity;
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

}  // namespace mlgibbs
