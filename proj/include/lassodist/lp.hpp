#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "lassodist/errors.hpp"

namespace lassodist::lp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Options {
  /// Absolute tolerance on constraint violation of the returned point.
  double feasibility_tol = 1e-9;
  double pivot_tol = 1e-12;
};

/// Linear feasibility system over free variables x:
///   eq * x == eq_rhs,   le * x <= le_rhs.
/// Either block may have zero rows, but both must have the same column count.
struct System {
  MatrixXd eq;
  VectorXd eq_rhs;
  MatrixXd le;
  VectorXd le_rhs;

  Eigen::Index variables() const { return std::max(eq.cols(), le.cols()); }

  double violation(const VectorXd& x) const {
    double v = 0.0;
    if (eq.rows() > 0) v = std::max(v, (eq * x - eq_rhs).cwiseAbs().maxCoeff());
    if (le.rows() > 0) v = std::max(v, (le * x - le_rhs).maxCoeff());
    return v;
  }
};

namespace detail {

// Phase-1 simplex on the standard form
//   [A_eq  -A_eq  0] [x+; x-; s] = b_eq
//   [A_le  -A_le  I]             = b_le,   x+, x-, s >= 0,
// with one artificial per row and Bland's anti-cycling rule.
class PhaseOne {
 public:
  PhaseOne(const System& sys, const Options& opt) : opt_(opt) {
    const Eigen::Index m_eq = sys.eq.rows();
    const Eigen::Index m_le = sys.le.rows();
    nvar_ = sys.variables();
    rows_ = m_eq + m_le;
    struct_cols_ = 2 * nvar_ + m_le;
    cols_ = struct_cols_ + rows_;
    tab_ = MatrixXd::Zero(rows_ + 1, cols_ + 1);
    basis_.assign(static_cast<std::size_t>(rows_), 0);

    for (Eigen::Index i = 0; i < rows_; ++i) {
      const bool is_eq = i < m_eq;
      Eigen::RowVectorXd a = is_eq ? Eigen::RowVectorXd(sys.eq.row(i))
                                   : Eigen::RowVectorXd(sys.le.row(i - m_eq));
      double rhs = is_eq ? sys.eq_rhs(i) : sys.le_rhs(i - m_eq);
      tab_.block(i, 0, 1, nvar_) = a;
      tab_.block(i, nvar_, 1, nvar_) = -a;
      if (!is_eq) tab_(i, 2 * nvar_ + (i - m_eq)) = 1.0;
      tab_(i, cols_) = rhs;
      if (rhs < 0.0) tab_.row(i) *= -1.0;
      tab_(i, struct_cols_ + i) = 1.0;
      basis_[static_cast<std::size_t>(i)] = struct_cols_ + i;
    }
    // Objective row: minimize sum of artificials, expressed in reduced costs.
    for (Eigen::Index i = 0; i < rows_; ++i) {
      tab_.row(rows_).head(struct_cols_) -= tab_.row(i).head(struct_cols_);
      tab_(rows_, cols_) -= tab_(i, cols_);
    }
  }

  /// Runs to optimality; returns the phase-1 objective (sum of artificials).
  double run() {
    const Eigen::Index max_pivots = 50 * (rows_ + cols_) + 100;
    for (Eigen::Index it = 0; it < max_pivots; ++it) {
      Eigen::Index enter = -1;
      for (Eigen::Index c = 0; c < cols_; ++c) {
        if (tab_(rows_, c) < -opt_.pivot_tol) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return -tab_(rows_, cols_);

      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        const double a = tab_(i, enter);
        if (a > opt_.pivot_tol) {
          const double ratio = tab_(i, cols_) / a;
          const bool tie = leave >= 0 && std::abs(ratio - best) <= 1e-14 * (1.0 + std::abs(best));
          if (ratio < best && !tie) {
            best = ratio;
            leave = i;
          } else if (tie &&
                     basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
            leave = i;
          }
        }
      }
      // Phase 1 is bounded below by zero, so an unbounded column is a
      // numerical artefact of a tiny reduced cost.
      if (leave < 0) return -tab_(rows_, cols_);
      pivot(leave, enter);
    }
    throw NumericalError("phase-1 simplex exceeded its pivot budget");
  }

  VectorXd point() const {
    VectorXd x = VectorXd::Zero(nvar_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const Eigen::Index b = basis_[static_cast<std::size_t>(i)];
      const double val = tab_(i, cols_);
      if (b < nvar_) {
        x(b) += val;
      } else if (b < 2 * nvar_) {
        x(b - nvar_) -= val;
      }
    }
    return x;
  }

 private:
  void pivot(Eigen::Index r, Eigen::Index c) {
    tab_.row(r) /= tab_(r, c);
    for (Eigen::Index i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = tab_(i, c);
      if (f != 0.0) tab_.row(i) -= f * tab_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  Options opt_;
  Eigen::Index nvar_ = 0, rows_ = 0, struct_cols_ = 0, cols_ = 0;
  MatrixXd tab_;
  std::vector<Eigen::Index> basis_;
};

inline double condition_estimate(const System& sys) {
  MatrixXd a(sys.eq.rows() + sys.le.rows(), sys.variables());
  if (sys.eq.rows() > 0) a.topRows(sys.eq.rows()) = sys.eq;
  if (sys.le.rows() > 0) a.bottomRows(sys.le.rows()) = sys.le;
  if (a.size() == 0) return 1.0;
  Eigen::JacobiSVD<MatrixXd> svd(a);
  const VectorXd& s = svd.singularValues();
  double smin = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > 0.0) smin = std::min(smin, s(k));
  }
  return s.size() > 0 && std::isfinite(smin) ? s(0) / smin : 1.0;
}

}  // namespace detail

/// A point satisfying `sys` within `opt.feasibility_tol`, or nullopt when the
/// system is infeasible. Throws NumericalError when the simplex reports
/// feasibility but the recovered point is far off.
inline std::optional<VectorXd> find_feasible_point(const System& sys, const Options& opt = {}) {
  if (sys.eq.rows() > 0 && sys.le.rows() > 0 && sys.eq.cols() != sys.le.cols()) {
    throw InputError("LP blocks disagree on the number of variables");
  }
  const Eigen::Index n = sys.variables();
  if (sys.eq.rows() + sys.le.rows() == 0) return VectorXd::Zero(n);

  detail::PhaseOne simplex(sys, opt);
  const double objective = simplex.run();
  const VectorXd x = simplex.point();
  const double viol = sys.violation(x);
  if (viol <= opt.feasibility_tol) return x;
  if (objective <= opt.feasibility_tol && viol > 1e-6) {
    std::ostringstream msg;
    msg << "LP feasibility solve inconsistent: phase-1 objective " << objective
        << " but recovered point violates constraints by " << viol
        << " (condition estimate " << detail::condition_estimate(sys) << ")";
    throw NumericalError(msg.str());
  }
  return std::nullopt;
}

/// Whether the polyhedral cone {a : A a >= 0} contains a non-zero vector.
/// An injective A makes the cone pointed, in which case a non-zero member
/// exists iff {A a >= 0, 1'A a = 1} is feasible.
inline bool cone_is_nontrivial(const MatrixXd& a, const Options& opt = {}) {
  if (a.cols() == 0) return false;
  if (a.rows() == 0) return true;
  Eigen::FullPivLU<MatrixXd> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() < a.cols()) return true;
  System sys;
  sys.eq = a.colwise().sum();
  sys.eq_rhs = VectorXd::Ones(1);
  sys.le = -a;
  sys.le_rhs = VectorXd::Zero(a.rows());
  return find_feasible_point(sys, opt).has_value();
}

}  // namespace lassodist::lp
