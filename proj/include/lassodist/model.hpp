#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lassodist/errors.hpp"

namespace lassodist {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Sorted 0-based coordinate indices. User-facing I/O converts to 1-based.
using IndexSet = std::vector<int>;

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

/// Regressor matrix together with the quantities every other module needs:
/// the Gram matrix X'X, the numerical rank, and orthonormal bases of the row
/// space col(X') and of its complement ker(X), both taken from one SVD.
///
/// Immutable after construction; share freely across threads.
class DesignProblem {
 public:
  /// Singular values count toward the rank iff they exceed
  /// max(n, p) * sigma_max * kRankRelTol.
  static constexpr double kRankRelTol = 1e-12;

  explicit DesignProblem(MatrixXd x) : x_(std::move(x)) {
    if (x_.rows() < 1 || x_.cols() < 1) {
      throw InputError("design matrix must have at least one row and one column");
    }
    if (!all_finite(x_)) throw InputError("design matrix has non-finite entries");

    gram_ = x_.transpose() * x_;
    gram_ = 0.5 * (gram_ + gram_.transpose()).eval();

    Eigen::JacobiSVD<MatrixXd> svd(x_, Eigen::ComputeFullV);
    singular_values_ = svd.singularValues();
    const double smax = singular_values_.size() > 0 ? singular_values_(0) : 0.0;
    const double thresh =
        static_cast<double>(std::max(x_.rows(), x_.cols())) * smax * kRankRelTol;
    rank_ = 0;
    for (Eigen::Index k = 0; k < singular_values_.size(); ++k) {
      if (singular_values_(k) > thresh) ++rank_;
    }
    const MatrixXd& v = svd.matrixV();
    row_basis_ = v.leftCols(rank_);
    null_basis_ = v.rightCols(p() - rank_);
  }

  int n() const { return static_cast<int>(x_.rows()); }
  int p() const { return static_cast<int>(x_.cols()); }
  const MatrixXd& x() const { return x_; }
  const MatrixXd& gram() const { return gram_; }
  int rank() const { return rank_; }
  bool full_column_rank() const { return rank_ == p(); }
  /// p x r, orthonormal columns spanning col(X').
  const MatrixXd& row_space_basis() const { return row_basis_; }
  /// p x (p - r), orthonormal columns spanning ker(X).
  const MatrixXd& null_space_basis() const { return null_basis_; }
  /// Leading r singular values of X, descending.
  VectorXd row_space_scales() const { return singular_values_.head(rank_); }
  const VectorXd& singular_values() const { return singular_values_; }

 private:
  MatrixXd x_;
  MatrixXd gram_;
  VectorXd singular_values_;
  int rank_ = 0;
  MatrixXd row_basis_;
  MatrixXd null_basis_;
};

inline DesignProblem build_problem(const MatrixXd& x) { return DesignProblem(x); }

/// A design whose Gram matrix equals `gram` (the upper Cholesky factor R with
/// R'R = gram). Used when only X'X is specified.
inline DesignProblem design_from_gram(const MatrixXd& gram) {
  if (gram.rows() != gram.cols() || gram.rows() < 1) {
    throw InputError("Gram matrix must be square and non-empty");
  }
  if (!all_finite(gram)) throw InputError("Gram matrix has non-finite entries");
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + gram.cwiseAbs().maxCoeff())) {
    throw InputError("Gram matrix is not symmetric");
  }
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw InputError("Gram matrix is not positive definite");
  }
  return DesignProblem(MatrixXd(llt.matrixU()));
}

/// Per-coordinate penalty weights lambda_j >= 0.
class TuningVector {
 public:
  TuningVector() = default;
  explicit TuningVector(VectorXd lambda) : lambda_(std::move(lambda)) {
    for (Eigen::Index j = 0; j < lambda_.size(); ++j) {
      if (!std::isfinite(lambda_(j)) || lambda_(j) < 0.0) {
        throw InputError("tuning parameters must be finite and non-negative");
      }
      if (lambda_(j) == 0.0) m0_.push_back(static_cast<int>(j));
    }
  }

  static TuningVector uniform(int p, double value) {
    return TuningVector(VectorXd::Constant(p, value));
  }

  const VectorXd& lambda() const { return lambda_; }
  double operator[](int j) const { return lambda_(j); }
  int size() const { return static_cast<int>(lambda_.size()); }
  /// Unpenalized coordinates {j : lambda_j = 0}.
  const IndexSet& unpenalized() const { return m0_; }
  bool penalized(int j) const { return lambda_(j) > 0.0; }
  TuningVector scaled(double factor) const { return TuningVector(lambda_ * factor); }

 private:
  VectorXd lambda_;
  IndexSet m0_;
};

/// d in {-1, 0, +1}^p together with the partition (D-, D+, D0).
class SignVector {
 public:
  SignVector() = default;
  explicit SignVector(std::vector<int> d) : d_(std::move(d)) {
    for (std::size_t j = 0; j < d_.size(); ++j) {
      const int s = d_[j];
      if (s == -1) {
        minus_.push_back(static_cast<int>(j));
      } else if (s == 1) {
        plus_.push_back(static_cast<int>(j));
      } else if (s == 0) {
        zero_.push_back(static_cast<int>(j));
      } else {
        throw InputError("sign vector entries must be -1, 0 or +1");
      }
    }
  }

  int size() const { return static_cast<int>(d_.size()); }
  int operator[](int j) const { return d_[static_cast<std::size_t>(j)]; }
  const std::vector<int>& values() const { return d_; }
  const IndexSet& minus() const { return minus_; }
  const IndexSet& plus() const { return plus_; }
  const IndexSet& zero() const { return zero_; }
  /// D- united with D+, ascending.
  IndexSet active() const {
    IndexSet a;
    for (int j = 0; j < size(); ++j) {
      if (d_[static_cast<std::size_t>(j)] != 0) a.push_back(j);
    }
    return a;
  }
  int l1() const { return static_cast<int>(minus_.size() + plus_.size()); }

  friend bool operator==(const SignVector& a, const SignVector& b) { return a.d_ == b.d_; }
  friend bool operator<(const SignVector& a, const SignVector& b) { return a.d_ < b.d_; }

  /// All 3^p sign vectors in lexicographic order of (d_1, ..., d_p).
  static std::vector<SignVector> enumerate(int p) {
    std::vector<SignVector> out;
    std::vector<int> d(static_cast<std::size_t>(p), -1);
    while (true) {
      out.emplace_back(d);
      int k = p - 1;
      while (k >= 0 && d[static_cast<std::size_t>(k)] == 1) {
        d[static_cast<std::size_t>(k)] = -1;
        --k;
      }
      if (k < 0) break;
      ++d[static_cast<std::size_t>(k)];
    }
    return out;
  }

 private:
  std::vector<int> d_;
  IndexSet minus_, plus_, zero_;
};

/// Default threshold below which a computed coefficient counts as zero.
inline constexpr double kDefaultZeroTol = 1e-9;

inline SignVector sign_partition(const VectorXd& z, double zero_tol = kDefaultZeroTol) {
  if (!(zero_tol >= 0.0)) throw InputError("zero_tol must be non-negative");
  std::vector<int> d(static_cast<std::size_t>(z.size()));
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double v = z(j);
    d[static_cast<std::size_t>(j)] = std::abs(v) <= zero_tol ? 0 : (v > 0 ? 1 : -1);
  }
  return SignVector(std::move(d));
}

/// Gaussian linear model y = X beta + eps, eps ~ N(0, sigma^2 I). Only
/// mu = X beta is identified; beta is one representative of its fiber.
struct GaussianModel {
  VectorXd beta;
  double sigma = 1.0;
  VectorXd mu;
};

inline GaussianModel make_model(const DesignProblem& problem, const VectorXd& beta, double sigma) {
  if (beta.size() != problem.p()) throw InputError("beta must have length p");
  if (!beta.allFinite()) throw InputError("beta has non-finite entries");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be positive");
  return GaussianModel{beta, sigma, problem.x() * beta};
}

/// True iff both parameters give the same mean X beta, i.e. lie in the same
/// fiber B_0 = {beta : X beta = mu}.
inline bool fiber_equivalent(const GaussianModel& a, const GaussianModel& b,
                             const DesignProblem& problem, double tol = 1e-10) {
  if (a.beta.size() != problem.p() || b.beta.size() != problem.p()) {
    throw InputError("parameter vectors must have length p");
  }
  const VectorXd mu1 = problem.x() * a.beta;
  const VectorXd mu2 = problem.x() * b.beta;
  const double scale = 1.0 + std::max(mu1.cwiseAbs().maxCoeff(), mu2.cwiseAbs().maxCoeff());
  return (mu1 - mu2).cwiseAbs().maxCoeff() <= tol * scale;
}

inline void check_tuning(const DesignProblem& problem, const TuningVector& tuning) {
  if (tuning.size() != problem.p()) throw InputError("lambda must have length p");
}

}  // namespace lassodist
