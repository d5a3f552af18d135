#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "mlgibbs/common.hpp"
#include "mlgibbs/distributions.hpp"

namespace mlgibbs {

// Inputs of the relative-entropy sum minimization: per-level priors R^(i)
// over the first i axes and positive coefficients a_i. Priors need not be
// marginals of one another.
struct MtProblem {
  std::vector<FiniteJoint> priors;
  TemperatureVector coeffs;

  MtProblem(std::vector<FiniteJoint> priors_in, TemperatureVector coeffs_in)
      : priors(std::move(priors_in)), coeffs(std::move(coeffs_in)) {
    if (priors.empty()) throw DimensionError("MtProblem: no priors");
    if (priors.size() != coeffs.size())
      throw DimensionError("MtProblem: coefficient count differs from prior count");
    const auto& full = priors.back().axis_sizes();
    if (full.size() != priors.size())
      throw DimensionError("MtProblem: deepest prior must span all axes");
    for (std::size_t i = 0; i < priors.size(); ++i) {
      const auto& sz = priors[i].axis_sizes();
      if (sz.size() != i + 1)
        throw DimensionError("MtProblem: prior " + std::to_string(i + 1) + " has wrong rank");
      for (std::size_t k = 0; k <= i; ++k)
        if (sz[k] != full[k]) throw DimensionError("MtProblem: axis sizes are not prefix-consistent");
    }
  }

  std::size_t depth() const { return priors.size(); }
  const std::vector<std::size_t>& axis_sizes() const { return priors.back().axis_sizes(); }
};

struct MtSolution {
  FiniteJoint joint;                 // recomposition of the factors
  std::vector<Conditional> factors;  // S^(1), S^(2)_{.|.}, ..., S^(d)_{.|...}
  double objective;                  // objective evaluated at the joint
  double renyi_residue;              // certified minimum value
};

// weighted sum of prefix-marginal divergences against the problem's priors
inline double mt_objective(const FiniteJoint& candidate, const MtProblem& problem) {
  if (candidate.axis_sizes() != problem.axis_sizes())
    throw DimensionError("mt_objective: candidate axes differ from problem axes");
  double sum = 0.0;
  for (std::size_t i = 0; i < problem.depth(); ++i) {
    double d = relative_entropy(marginalize(candidate, i + 1), problem.priors[i]);
    if (d == kInfinity) return kInfinity;
    sum += problem.coeffs[i] * d;
  }
  return sum;
}

// Backwards marginalize-then-tilt recursion. Returns the unique minimizer
// together with the accumulated Renyi residue, which equals the minimum of
// the objective.
inline MtSolution mt_solve(const MtProblem& problem) {
  const std::size_t d = problem.depth();
  std::vector<FiniteJoint> stage;  // stage[k] = S^(k+1), over axes 1..k+1
  stage.reserve(d);
  for (std::size_t k = 0; k < d; ++k) stage.push_back(problem.priors[k]);

  double residue = 0.0;
  double suffix = problem.coeffs[d - 1];  // a_{k+1} + ... + a_d during the loop
  for (std::size_t k = d - 1; k-- > 0;) {
    const FiniteJoint m = marginalize(stage[k + 1], k + 1);
    const double a_k = problem.coeffs[k];
    const double lambda = a_k / (a_k + suffix);
    try {
      residue += suffix * renyi_divergence(problem.priors[k], m, lambda);
      stage[k] = tilt(problem.priors[k], m, lambda);
    } catch (const SingularTiltError&) {
      throw SingularTiltError("MT undefined for these priors: singular tilt at level " +
                              std::to_string(k + 1));
    }
    suffix += a_k;
  }

  std::vector<Conditional> factors;
  factors.reserve(d);
  for (std::size_t k = 0; k < d; ++k) factors.push_back(chain_factorize(stage[k]).back());

  FiniteJoint joint = recompose(factors);
  const double objective = mt_objective(joint, problem);
  return MtSolution{std::move(joint), std::move(factors), objective, residue};
}

struct GridMinimum {
  FiniteJoint joint;
  double objective;
};

namespace detail {

// Exhaustive minimization of the objective over the simplex grid
// {t/G : t nonnegative integers summing to G over the cells}. The objective
// decomposes over the tree of index prefixes (each level-i prefix cell
// contributes a_i * m * log(m / r_i)), so the grid minimum is computed
// exactly by a bottom-up dynamic program over integer masses instead of
// enumerating every composition; the result is identical to enumeration,
// with ties broken toward the lexicographically smallest count vector.
class GridSearch {
 public:
  GridSearch(const MtProblem& problem, int grid_steps)
      : problem_(problem), grid_(grid_steps) {
    const auto& sizes = problem.axis_sizes();
    log_mass_.resize(static_cast<std::size_t>(grid_) + 1);
    for (int t = 1; t <= grid_; ++t)
      log_mass_[static_cast<std::size_t>(t)] =
          std::log(static_cast<double>(t) / static_cast<double>(grid_));
    counts_.assign(problem.priors.back().cell_count(), 0);
    combine_children(0, 0, sizes[0]);
    reconstruct_children(0, 0, sizes[0], grid_);
  }

  GridMinimum result() const {
    std::vector<double> p(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i)
      p[i] = static_cast<double>(counts_[i]) / static_cast<double>(grid_);
    FiniteJoint joint(problem_.axis_sizes(), std::move(p));
    return GridMinimum{joint, mt_objective(joint, problem_)};
  }

 private:
  // a_level * m * log(m / prior), the contribution of one prefix cell
  double node_term(std::size_t level, std::size_t flat, int t) const {
    if (t == 0) return 0.0;
    const double r = problem_.priors[level][flat];
    if (!(r > 0.0)) return kInfinity;
    const double m = static_cast<double>(t) / static_cast<double>(grid_);
    return problem_.coeffs[level] * m * (log_mass_[static_cast<std::size_t>(t)] - std::log(r));
  }

  // cost table (over mass quanta) of the subtree rooted at a prefix cell
  std::vector<double> node_cost(std::size_t level, std::size_t flat) {
    const std::size_t d = problem_.depth();
    std::vector<double> cost(static_cast<std::size_t>(grid_) + 1, 0.0);
    if (level + 1 < d) {
      const std::size_t branch = problem_.axis_sizes()[level + 1];
      cost = combine_children(level + 1, flat * branch, branch);
    }
    for (int t = 0; t <= grid_; ++t)
      cost[static_cast<std::size_t>(t)] += node_term(level, flat, t);
    return cost;
  }

  // knapsack-combine the children cost tables; retains the suffix tables
  // needed to reconstruct an optimal assignment
  std::vector<double> combine_children(std::size_t level, std::size_t first, std::size_t count) {
    std::vector<std::vector<double>> tables(count);
    for (std::size_t j = 0; j < count; ++j) tables[j] = node_cost(level, first + j);
    std::vector<std::vector<double>> suffix(count);
    suffix[count - 1] = tables[count - 1];
    for (std::size_t j = count - 1; j-- > 0;) {
      suffix[j].assign(static_cast<std::size_t>(grid_) + 1, kInfinity);
      for (int t = 0; t <= grid_; ++t) {
        double best = kInfinity;
        for (int u = 0; u <= t; ++u) {
          const double v = tables[j][static_cast<std::size_t>(u)] +
                           suffix[j + 1][static_cast<std::size_t>(t - u)];
          if (v < best) best = v;
        }
        suffix[j][static_cast<std::size_t>(t)] = best;
      }
    }
    std::vector<double> group = suffix[0];
    child_tables_[{level, first}] = std::move(tables);
    child_suffix_[{level, first}] = std::move(suffix);
    return group;
  }

  void reconstruct_children(std::size_t level, std::size_t first, std::size_t count, int mass) {
    const auto& tables = child_tables_.at({level, first});
    const auto& suffix = child_suffix_.at({level, first});
    int t = mass;
    for (std::size_t j = 0; j < count; ++j) {
      int u = t;
      if (j + 1 < count) {
        const double target = suffix[j][static_cast<std::size_t>(t)];
        for (int cand = 0; cand <= t; ++cand) {
          const double v = tables[j][static_cast<std::size_t>(cand)] +
                           suffix[j + 1][static_cast<std::size_t>(t - cand)];
          if (v == target || (v == kInfinity && target == kInfinity)) {
            u = cand;
            break;
          }
        }
      }
      assign(level, first + j, u);
      t -= u;
    }
  }

  void assign(std::size_t level, std::size_t flat, int mass) {
    if (level + 1 < problem_.depth()) {
      const std::size_t branch = problem_.axis_sizes()[level + 1];
      reconstruct_children(level + 1, flat * branch, branch, mass);
    } else {
      counts_[flat] = mass;
    }
  }

  const MtProblem& problem_;
  int grid_;
  std::vector<double> log_mass_;
  std::vector<int> counts_;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::vector<double>>> child_tables_;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::vector<double>>> child_suffix_;
};

}  // namespace detail

// Test oracle: the exact minimum of mt_objective over the simplex grid with
// grid_steps quanta. Deterministic, with resolution-bounded error.
inline GridMinimum brute_force_minimize(const MtProblem& problem, int grid_steps) {
  if (problem.priors.back().cell_count() > 16)
    throw DeskScaleError("brute_force_minimize: oracle restricted to desk scale (<= 16 cells)");
  if (grid_steps < 10) throw DomainError("brute_force_minimize: grid_steps must be >= 10");
  detail::GridSearch search(problem, grid_steps);
  return search.result();
}

// Gibbs-tilts the deepest prior by the empirical risk table: R^(d) becomes
// exp(-risk/t_d) * Q^(d), normalized; the shallower priors pass through.
// Solving the returned problem yields the exact twisted posterior.
inline MtProblem build_twisted_problem(std::vector<FiniteJoint> priors,
                                       const TemperatureVector& temps,
                                       const std::vector<double>& empirical_risk) {
  if (priors.empty()) throw DimensionError("build_twisted_problem: no priors");
  FiniteJoint& deepest = priors.back();
  if (empirical_risk.size() != deepest.cell_count())
    throw DimensionError("build_twisted_problem: risk table size differs from weight space");
  for (double r : empirical_risk)
    if (!std::isfinite(r) || r < 0.0)
      throw DomainError("build_twisted_problem: risk table must be finite and nonnegative");
  const double t_d = temps[temps.size() - 1];

  std::vector<double> logw(deepest.cell_count(), -kInfinity);
  double maxw = -kInfinity;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    if (deepest[i] > 0.0) {
      logw[i] = std::log(deepest[i]) - empirical_risk[i] / t_d;
      maxw = std::max(maxw, logw[i]);
    }
  }
  if (maxw == -kInfinity)
    throw DomainError("build_twisted_problem: degenerate prior, zero normalizer");
  std::vector<double> w(logw.size(), 0.0);
  for (std::size_t i = 0; i < logw.size(); ++i)
    if (logw[i] != -kInfinity) w[i] = std::exp(logw[i] - maxw);
  deepest = FiniteJoint::normalized(deepest.axis_sizes(), std::move(w));
  return MtProblem(std::move(priors), temps);
}

}  // namespace mlgibbs
