#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lassodist/errors.hpp"
#include "lassodist/model.hpp"
#include "lassodist/monte_carlo.hpp"
#include "lassodist/probability.hpp"
#include "lassodist/solver.hpp"

namespace lassodist {

struct SimulationConfig {
  std::int64_t n_rep = 10000;
  std::uint64_t seed = 1;
  double zero_tol = kDefaultZeroTol;
  double solver_tol = 1e-10;
  int workers = 0;
  int ecdf_points = 21;
  /// Run the exact uniqueness test at every replicate.
  bool test_uniqueness = true;

  void validate() const {
    if (n_rep < 1) throw InputError("n_rep must be at least 1");
    if (!(zero_tol > 0.0) || !(solver_tol > 0.0)) throw InputError("tolerances must be positive");
    if (ecdf_points < 2) throw InputError("ecdf grid needs at least 2 points");
  }
};

/// Marginal empirical cdf of one coefficient on a grid.
struct EcdfAxis {
  int index = 0;
  std::vector<double> z;
  std::vector<double> f;
};

struct EmpiricalSummary {
  std::int64_t n_rep = 0;
  std::int64_t failures = 0;
  std::uint64_t seed = 0;
  std::map<SignVector, std::int64_t> sign_pattern_freq;
  std::map<IndexSet, std::int64_t> support_freq;
  std::vector<EcdfAxis> ecdf_grid;
  std::int64_t nonunique_count = 0;
  VectorXd mean;
  MatrixXd covariance;

  std::int64_t successes() const { return n_rep - failures; }
};

namespace detail {

struct ReplicateOutcome {
  bool ok = false;
  bool unique = true;
  VectorXd b;
};

inline std::vector<ReplicateOutcome> simulate_replicates(const DesignProblem& problem, const GaussianModel& model,
                                                         const TuningVector& tuning, const SimulationConfig& cfg) {
  cfg.validate();
  check_tuning(problem, tuning);
  if (model.mu.size() != problem.n()) throw InputError("mu must have length n");
  SolverOptions opt;
  opt.tol = cfg.solver_tol;
  opt.zero_tol = cfg.zero_tol;
  const std::function<ReplicateOutcome(std::int64_t)> fn = [&](std::int64_t rep) {
    ReplicateOutcome o;
    const VectorXd y = mc::draw_response(model, cfg.seed, rep);
    try {
      if (cfg.test_uniqueness) {
        const SolutionSetDescription s = describe_solution_set(problem, y, tuning, opt);
        o.b = s.anchor.b;
        o.unique = s.is_unique_at_y;
      } else {
        o.b = solve(problem, y, tuning, opt).b;
      }
      o.ok = true;
    } catch (const ConvergenceError&) {
      o.ok = false;
    }
    return o;
  };
  std::vector<ReplicateOutcome> out = mc::map_replicates<ReplicateOutcome>(cfg.n_rep, cfg.workers, fn);
  std::int64_t failures = 0;
  for (const auto& o : out) failures += o.ok ? 0 : 1;
  if (static_cast<double>(failures) > mc::kMaxFailureRate * static_cast<double>(cfg.n_rep)) {
    throw NumericalError(std::to_string(failures) + " of " + std::to_string(cfg.n_rep) +
                         " replicates failed to converge");
  }
  return out;
}

}  // namespace detail

inline EmpiricalSummary run_simulation(const DesignProblem& problem, const GaussianModel& model,
                                       const TuningVector& tuning, const SimulationConfig& cfg = {}) {
  const auto reps = detail::simulate_replicates(problem, model, tuning, cfg);
  const int p = problem.p();
  EmpiricalSummary s;
  s.n_rep = cfg.n_rep;
  s.seed = cfg.seed;
  s.mean = VectorXd::Zero(p);
  s.covariance = MatrixXd::Zero(p, p);
  std::vector<std::vector<double>> coords(static_cast<std::size_t>(p));
  for (const auto& o : reps) {
    if (!o.ok) {
      ++s.failures;
      continue;
    }
    const SignVector d = sign_partition(o.b, cfg.zero_tol);
    ++s.sign_pattern_freq[d];
    ++s.support_freq[d.active()];
    s.nonunique_count += o.unique ? 0 : 1;
    s.mean += o.b;
    for (int j = 0; j < p; ++j) coords[static_cast<std::size_t>(j)].push_back(o.b(j));
  }
  const auto n = static_cast<double>(s.successes());
  if (n > 0) s.mean /= n;
  for (const auto& o : reps) {
    if (!o.ok) continue;
    const VectorXd c = o.b - s.mean;
    s.covariance += c * c.transpose();
  }
  if (n > 1) s.covariance /= n - 1.0;

  for (int j = 0; j < p; ++j) {
    auto& v = coords[static_cast<std::size_t>(j)];
    std::sort(v.begin(), v.end());
    const double sd = std::sqrt(std::max(0.0, s.covariance(j, j)));
    const double half = sd > 0.0 ? 4.0 * sd : 1.0;
    EcdfAxis ax;
    ax.index = j;
    for (int k = 0; k < cfg.ecdf_points; ++k) {
      const double z = s.mean(j) - half + 2.0 * half * k / (cfg.ecdf_points - 1);
      const auto cnt = std::upper_bound(v.begin(), v.end(), z) - v.begin();
      ax.z.push_back(z);
      ax.f.push_back(n > 0 ? static_cast<double>(cnt) / n : 0.0);
    }
    s.ecdf_grid.push_back(std::move(ax));
  }
  return s;
}

/// Share of responses at which the solution set has more than one point.
inline RegionProbability estimate_nonuniqueness_probability(const DesignProblem& problem, const GaussianModel& model,
                                                            const TuningVector& tuning, SimulationConfig cfg = {}) {
  cfg.test_uniqueness = true;
  const auto reps = detail::simulate_replicates(problem, model, tuning, cfg);
  std::int64_t ok = 0, hits = 0;
  for (const auto& o : reps) {
    if (!o.ok) continue;
    ++ok;
    hits += o.unique ? 0 : 1;
  }
  return RegionProbability::from_counts(hits, ok, cfg.seed);
}

struct ComparisonReport {
  double analytic = 0.0;
  double empirical = 0.0;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Agreement within 3 combined standard errors plus both quadrature tolerances.
inline ComparisonReport compare_analytic_empirical(const RegionProbability& analytic,
                                                   const RegionProbability& empirical, double extra_tol = 0.0) {
  ComparisonReport r;
  r.analytic = analytic.estimate;
  r.empirical = empirical.estimate;
  r.discrepancy = std::abs(analytic.estimate - empirical.estimate);
  r.tolerance = 3.0 * std::hypot(analytic.std_error, empirical.std_error) + analytic.quad_tol +
                empirical.quad_tol + extra_tol;
  r.pass = r.discrepancy <= r.tolerance;
  return r;
}

}  // namespace lassodist
