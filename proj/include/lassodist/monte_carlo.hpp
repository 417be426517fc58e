#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "lassodist/model.hpp"
#include "lassodist/rng.hpp"
#include "lassodist/solver.hpp"

namespace lassodist::mc {

/// Replicate `rep` of the response: y = mu + sigma * eps with eps drawn from
/// the counter-based stream (seed, rep).
inline VectorXd draw_response(const GaussianModel& model, std::uint64_t seed, std::int64_t rep) {
  rng::Stream s(seed, static_cast<std::uint64_t>(rep));
  VectorXd y(model.mu.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = model.mu(i) + model.sigma * s.normal();
  return y;
}

inline int resolve_workers(int requested, std::int64_t n) {
  int w = requested > 0 ? requested : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  return static_cast<int>(std::clamp<std::int64_t>(w, 1, std::max<std::int64_t>(n, 1)));
}

/// Evaluates fn(rep) for rep = 0..n-1 on `workers` threads and returns the
/// results in replicate order. Output does not depend on the worker count as
/// long as fn(rep) depends only on rep.
template <class Result>
std::vector<Result> map_replicates(std::int64_t n, int workers, const std::function<Result(std::int64_t)>& fn) {
  std::vector<Result> out(static_cast<std::size_t>(n));
  const int w = resolve_workers(workers, n);
  if (w == 1) {
    for (std::int64_t r = 0; r < n; ++r) out[static_cast<std::size_t>(r)] = fn(r);
    return out;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
  {
    std::vector<std::jthread> pool;
    const std::int64_t chunk = (n + w - 1) / w;
    for (int t = 0; t < w; ++t) {
      pool.emplace_back([&, t] {
        try {
          const std::int64_t lo = t * chunk;
          const std::int64_t hi = std::min(n, lo + chunk);
          for (std::int64_t r = lo; r < hi; ++r) out[static_cast<std::size_t>(r)] = fn(r);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

/// One simulated replicate: the response and the solver output, or nothing
/// when the solver failed to converge.
struct Replicate {
  VectorXd y;
  std::optional<LassoSolution> solution;
};

inline Replicate run_replicate(const DesignProblem& problem, const GaussianModel& model, const TuningVector& tuning,
                               std::uint64_t seed, std::int64_t rep, const SolverOptions& opt) {
  Replicate r;
  r.y = draw_response(model, seed, rep);
  try {
    r.solution = solve(problem, r.y, tuning, opt);
  } catch (const ConvergenceError&) {
    r.solution.reset();
  }
  return r;
}

/// Largest tolerated share of non-converged replicates.
inline constexpr double kMaxFailureRate = 1e-3;

}  // namespace lassodist::mc
