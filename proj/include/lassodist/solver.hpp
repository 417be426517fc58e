#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "lassodist/errors.hpp"
#include "lassodist/lp.hpp"
#include "lassodist/model.hpp"

namespace lassodist {

// Objective convention used throughout:
//
//   L(b) = ||y - X b||^2 + 2 * sum_j lambda_j |b_j|
//
// The penalty carries a factor 2, so the per-coordinate soft-threshold level
// is lambda_j / (X'X)_jj. Most libraries use an unscaled penalty; pass
// lambda/2 to compare with those.

struct SolverOptions {
  double tol = 1e-10;  // on the KKT residual
  int max_iter = 200000;  // full coordinate sweeps
  double zero_tol = kDefaultZeroTol;
};

struct LassoSolution {
  VectorXd b;
  VectorXd fit;
  double objective = 0.0;
  double kkt_residual = 0.0;
  IndexSet active_model;
  int iterations = 0;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, LassoSolution best)
      : NumericalError(what), best_(std::move(best)) {}
  const LassoSolution& best() const { return best_; }

 private:
  LassoSolution best_;
};

/// Maximum violation of the first-order conditions, with the offending index.
/// With g = X'y - X'X b the conditions are
///   g_j = sgn(b_j) lambda_j   where |b_j| > zero_tol,
///   |g_j| <= lambda_j         otherwise.
struct KktReport {
  bool ok = true;
  double max_violation = 0.0;
  int worst_index = -1;
};

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

namespace detail {

inline KktReport kkt_from_gradient(const VectorXd& g, const VectorXd& b, const VectorXd& lambda,
                                   double zero_tol, double tol) {
  KktReport r;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    double viol;
    if (std::abs(b(j)) > zero_tol) {
      viol = std::abs(g(j) - (b(j) > 0 ? lambda(j) : -lambda(j)));
    } else {
      viol = std::max(0.0, std::abs(g(j)) - lambda(j));
    }
    if (viol > r.max_violation) {
      r.max_violation = viol;
      r.worst_index = static_cast<int>(j);
    }
  }
  r.ok = r.max_violation <= tol;
  if (r.max_violation == 0.0) r.worst_index = -1;
  return r;
}

// Re-solves the stationarity equations on the current support with fixed
// signs. Accepted only when the support has full rank, the signs survive and
// the KKT residual does not get worse.
inline bool polish(const MatrixXd& gram, const VectorXd& xty, const VectorXd& lambda,
                   double zero_tol, VectorXd& b, VectorXd& g, double& residual) {
  std::vector<int> support;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    if (std::abs(b(j)) > zero_tol) support.push_back(static_cast<int>(j));
  }
  if (support.empty()) return false;
  const auto k = static_cast<Eigen::Index>(support.size());
  MatrixXd gs(k, k);
  VectorXd rhs(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const int ja = support[static_cast<std::size_t>(a)];
    for (Eigen::Index c = 0; c < k; ++c) gs(a, c) = gram(ja, support[static_cast<std::size_t>(c)]);
    rhs(a) = xty(ja) - (b(ja) > 0 ? lambda(ja) : -lambda(ja));
  }
  Eigen::FullPivLU<MatrixXd> lu(gs);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) return false;
  const VectorXd sol = lu.solve(rhs);
  VectorXd cand = VectorXd::Zero(b.size());
  for (Eigen::Index a = 0; a < k; ++a) {
    const int ja = support[static_cast<std::size_t>(a)];
    if (sol(a) * b(ja) <= 0.0 || std::abs(sol(a)) <= zero_tol) return false;
    cand(ja) = sol(a);
  }
  const VectorXd gc = xty - gram * cand;
  const KktReport rep = kkt_from_gradient(gc, cand, lambda, zero_tol, 0.0);
  if (rep.max_violation > residual) return false;
  b = cand;
  g = gc;
  residual = rep.max_violation;
  return true;
}

}  // namespace detail

/// Cyclic coordinate descent on the Gram form of the objective, starting at
/// b = 0 and sweeping coordinates in order 1..p. Works on X'y directly, which
/// is all the objective depends on besides y'y.
///
/// Columns with (X'X)_jj = 0 are pinned to zero.
inline LassoSolution solve_gram(const MatrixXd& gram, const VectorXd& xty, const TuningVector& tuning,
                                const SolverOptions& opt = {}) {
  const Eigen::Index p = gram.rows();
  const VectorXd& lambda = tuning.lambda();
  if (xty.size() != p || lambda.size() != p) throw InputError("dimension mismatch in solver input");
  if (!(opt.tol > 0.0)) throw InputError("solver tolerance must be positive");

  VectorXd b = VectorXd::Zero(p);
  VectorXd g = xty;
  double residual = detail::kkt_from_gradient(g, b, lambda, opt.zero_tol, opt.tol).max_violation;
  int sweeps = 0;
  while (residual > opt.tol && sweeps < opt.max_iter) {
    ++sweeps;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = gram(j, j);
      if (gjj <= 0.0) continue;
      const double rho = g(j) + gjj * b(j);
      const double next = soft_threshold(rho, lambda(j)) / gjj;
      const double delta = next - b(j);
      if (delta != 0.0) {
        b(j) = next;
        g.noalias() -= gram.col(j) * delta;
      }
    }
    if (sweeps % 64 == 0) g = xty - gram * b;
    residual = detail::kkt_from_gradient(g, b, lambda, opt.zero_tol, opt.tol).max_violation;
    if (residual > opt.tol && sweeps % 4 == 0) {
      detail::polish(gram, xty, lambda, opt.zero_tol, b, g, residual);
    }
  }
  g = xty - gram * b;
  residual = detail::kkt_from_gradient(g, b, lambda, opt.zero_tol, opt.tol).max_violation;

  LassoSolution sol;
  sol.b = b;
  sol.kkt_residual = residual;
  sol.iterations = sweeps;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(b(j)) > opt.zero_tol) sol.active_model.push_back(static_cast<int>(j));
  }
  if (residual > opt.tol) {
    throw ConvergenceError("coordinate descent did not reach KKT residual " + std::to_string(opt.tol) +
                               " (best " + std::to_string(residual) + ")",
                           sol);
  }
  return sol;
}

inline double lasso_objective(const DesignProblem& problem, const VectorXd& y, const TuningVector& tuning,
                              const VectorXd& b) {
  return (y - problem.x() * b).squaredNorm() + 2.0 * tuning.lambda().dot(b.cwiseAbs());
}

inline LassoSolution solve(const DesignProblem& problem, const VectorXd& y, const TuningVector& tuning,
                           const SolverOptions& opt = {}) {
  check_tuning(problem, tuning);
  if (y.size() != problem.n()) throw InputError("y must have length n");
  if (!y.allFinite()) throw InputError("y has non-finite entries");
  const VectorXd xty = problem.x().transpose() * y;
  LassoSolution sol;
  try {
    sol = solve_gram(problem.gram(), xty, tuning, opt);
  } catch (ConvergenceError& e) {
    LassoSolution best = e.best();
    best.fit = problem.x() * best.b;
    best.objective = lasso_objective(problem, y, tuning, best.b);
    throw ConvergenceError(e.what(), best);
  }
  sol.fit = problem.x() * sol.b;
  sol.objective = lasso_objective(problem, y, tuning, sol.b);
  return sol;
}

inline LassoSolution solve(const DesignProblem& problem, const VectorXd& y, const TuningVector& tuning,
                           double tol, int max_iter) {
  SolverOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  return solve(problem, y, tuning, opt);
}

inline KktReport is_solution(const DesignProblem& problem, const VectorXd& y, const TuningVector& tuning,
                             const VectorXd& b, double tol, double zero_tol = kDefaultZeroTol) {
  check_tuning(problem, tuning);
  if (b.size() != problem.p()) throw InputError("b must have length p");
  if (y.size() != problem.n()) throw InputError("y must have length n");
  const VectorXd g = problem.x().transpose() * (y - problem.x() * b);
  return detail::kkt_from_gradient(g, b, tuning.lambda(), zero_tol, tol);
}

/// Position of g_j = (X'y - X'X b)_j relative to [-lambda_j, lambda_j].
enum class Equicorrelation { AtUpper, AtLower, Inside };

struct SolutionSetDescription {
  VectorXd fit;
  LassoSolution anchor;
  std::vector<Equicorrelation> equicorrelation_signs;
  bool is_unique_at_y = true;
};

/// Whether the solution set through `b` is a single point, given the
/// gradient g shared by all solutions. Every solution b' has support inside
/// E = {j : |g_j| = lambda_j}, reproduces X_E b'_E = X b, and keeps
/// sgn(b'_j) = sgn(g_j) on penalized j. Uniqueness therefore fails iff
/// ker(X_E) contains a direction along which the sign constraints active at
/// b stay satisfied.
inline bool solution_is_unique(const DesignProblem& problem, const TuningVector& tuning, const VectorXd& b,
                               const std::vector<Equicorrelation>& cls, double zero_tol) {
  IndexSet e;
  for (int j = 0; j < problem.p(); ++j) {
    if (cls[static_cast<std::size_t>(j)] != Equicorrelation::Inside) e.push_back(j);
  }
  if (e.empty()) return true;
  const auto k = static_cast<Eigen::Index>(e.size());
  MatrixXd xe(problem.n(), k);
  for (Eigen::Index a = 0; a < k; ++a) xe.col(a) = problem.x().col(e[static_cast<std::size_t>(a)]);

  Eigen::JacobiSVD<MatrixXd> svd(xe, Eigen::ComputeFullV);
  const VectorXd& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double thresh = static_cast<double>(std::max<Eigen::Index>(xe.rows(), k)) * smax *
                        DesignProblem::kRankRelTol;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > thresh) ++rank;
  }
  if (smax == 0.0) rank = 0;
  if (rank == k) return true;
  const MatrixXd kernel = svd.matrixV().rightCols(k - rank);

  // Sign constraints that are tight at b: penalized coordinates of E sitting
  // at zero must move in the direction of sgn(g_j).
  std::vector<Eigen::Index> rows;
  std::vector<double> signs;
  for (Eigen::Index a = 0; a < k; ++a) {
    const int j = e[static_cast<std::size_t>(a)];
    if (!tuning.penalized(j) || std::abs(b(j)) > zero_tol) continue;
    rows.push_back(a);
    signs.push_back(cls[static_cast<std::size_t>(j)] == Equicorrelation::AtUpper ? 1.0 : -1.0);
  }
  MatrixXd cone(static_cast<Eigen::Index>(rows.size()), kernel.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    cone.row(static_cast<Eigen::Index>(r)) = signs[r] * kernel.row(rows[r]);
  }
  return !lp::cone_is_nontrivial(cone);
}

/// Solves at y and characterizes the full solution set: the common fit, the
/// equicorrelation classification and whether the anchor is the only solution.
inline SolutionSetDescription describe_solution_set(const DesignProblem& problem, const VectorXd& y,
                                                    const TuningVector& tuning,
                                                    const SolverOptions& opt = {}) {
  SolutionSetDescription out;
  out.anchor = solve(problem, y, tuning, opt);
  out.fit = out.anchor.fit;
  const VectorXd g = problem.x().transpose() * (y - out.fit);
  // Classification uses a looser band than the solver so that pinned
  // coordinates are never mistaken for interior ones.
  const double band = std::max(1e3 * opt.tol, 1e-8);
  out.equicorrelation_signs.resize(static_cast<std::size_t>(problem.p()));
  for (int j = 0; j < problem.p(); ++j) {
    const double lam = tuning[j];
    Equicorrelation c;
    if (std::abs(g(j) - lam) <= band) {
      c = Equicorrelation::AtUpper;
    } else if (std::abs(g(j) + lam) <= band) {
      c = Equicorrelation::AtLower;
    } else {
      c = Equicorrelation::Inside;
    }
    out.equicorrelation_signs[static_cast<std::size_t>(j)] = c;
  }
  out.is_unique_at_y = problem.full_column_rank() ||
                       solution_is_unique(problem, tuning, out.anchor.b, out.equicorrelation_signs, opt.zero_tol);
  return out;
}

}  // namespace lassodist
