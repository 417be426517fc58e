#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lassodist/errors.hpp"
#include "lassodist/lp.hpp"
#include "lassodist/model.hpp"
#include "lassodist/solver.hpp"

namespace lassodist {

// ---------------------------------------------------------------------------
// Faces of the lambda-box  prod_j [-lambda_j, lambda_j].
// ---------------------------------------------------------------------------

struct FaceConstraint {
  enum class Kind { Fixed, Interval };
  Kind kind = Kind::Interval;
  double value = 0.0;       // Fixed: the pinned value (+-lambda_j)
  double half_width = 0.0;  // Interval: lambda_j

  static FaceConstraint fixed(double v) { return {Kind::Fixed, v, 0.0}; }
  static FaceConstraint interval(double lam) { return {Kind::Interval, 0.0, lam}; }

  bool admits(double x, double tol) const {
    return kind == Kind::Fixed ? std::abs(x - value) <= tol : std::abs(x) <= half_width + tol;
  }
};

/// A fully sign-resolved face: each coordinate either pinned at +-lambda_j or
/// free in [-lambda_j, lambda_j]. Coordinates with lambda_j = 0 pin to 0
/// whichever sign is requested.
class FaceBox {
 public:
  FaceBox() = default;

  /// The face fixing the coordinates in `model` at signs[k] * lambda_j.
  FaceBox(const TuningVector& tuning, const IndexSet& model, const std::vector<int>& signs)
      : model_(model), constraints_(static_cast<std::size_t>(tuning.size())) {
    if (signs.size() != model.size()) throw InputError("one sign per model index is required");
    for (int j = 0; j < tuning.size(); ++j) {
      constraints_[static_cast<std::size_t>(j)] = FaceConstraint::interval(tuning[j]);
    }
    for (std::size_t k = 0; k < model.size(); ++k) {
      const int j = model[k];
      if (j < 0 || j >= tuning.size()) throw InputError("model index out of range");
      if (signs[k] != 1 && signs[k] != -1) throw InputError("face signs must be +-1");
      constraints_[static_cast<std::size_t>(j)] = FaceConstraint::fixed(signs[k] * tuning[j]);
    }
  }

  /// The face B_j(b_j) used by the shrinkage areas: fixed at sgn(b_j) lambda_j
  /// where b_j != 0, the full interval where b_j == 0.
  static FaceBox from_point(const TuningVector& tuning, const VectorXd& b, double zero_tol) {
    IndexSet model;
    std::vector<int> signs;
    for (int j = 0; j < tuning.size(); ++j) {
      if (std::abs(b(j)) > zero_tol) {
        model.push_back(j);
        signs.push_back(b(j) > 0 ? 1 : -1);
      }
    }
    return FaceBox(tuning, model, signs);
  }

  const IndexSet& model() const { return model_; }
  const std::vector<FaceConstraint>& constraints() const { return constraints_; }
  int size() const { return static_cast<int>(constraints_.size()); }

  bool contains(const VectorXd& v, double tol = 1e-9) const {
    for (int j = 0; j < size(); ++j) {
      if (!constraints_[static_cast<std::size_t>(j)].admits(v(j), tol)) return false;
    }
    return true;
  }

 private:
  IndexSet model_;
  std::vector<FaceConstraint> constraints_;
};

/// The union of faces B_M with unresolved signs:
///   {-lambda_j, lambda_j} for j in M,  [-lambda_j, lambda_j] otherwise.
/// Satisfies B_M' subset of B_M whenever M subset of M'.
class ModelFace {
 public:
  ModelFace(TuningVector tuning, IndexSet model) : tuning_(std::move(tuning)), model_(std::move(model)) {}

  bool contains(const VectorXd& v, double tol = 1e-9) const {
    std::vector<char> in_model(static_cast<std::size_t>(tuning_.size()), 0);
    for (int j : model_) in_model[static_cast<std::size_t>(j)] = 1;
    for (int j = 0; j < tuning_.size(); ++j) {
      const double a = std::abs(v(j));
      if (in_model[static_cast<std::size_t>(j)] ? std::abs(a - tuning_[j]) > tol : a > tuning_[j] + tol) {
        return false;
      }
    }
    return true;
  }

  const IndexSet& model() const { return model_; }

 private:
  TuningVector tuning_;
  IndexSet model_;
};

/// Certificate that col(X') meets a face: v = X'z lies in the face.
struct FaceWitness {
  IndexSet model;
  std::vector<int> signs;
  VectorXd z;
  VectorXd v;
};

struct GeometryOptions {
  double feasibility_tol = 1e-9;
  /// Largest p for which check_uniqueness enumerates faces.
  int uniqueness_limit = 14;
  int selectable_limit = 30;
  int general_position_limit = 12;
};

/// LP in z in R^n:  (X'z)_j = fixed_j on pinned coordinates and
/// -lambda_j <= (X'z)_j <= lambda_j elsewhere.
inline std::optional<FaceWitness> face_intersects_row_space(const DesignProblem& problem, const FaceBox& face,
                                                            const GeometryOptions& opt = {}) {
  if (face.size() != problem.p()) throw InputError("face dimension must equal p");
  const MatrixXd& x = problem.x();
  const int p = problem.p();
  std::vector<int> fixed, free;
  for (int j = 0; j < p; ++j) {
    (face.constraints()[static_cast<std::size_t>(j)].kind == FaceConstraint::Kind::Fixed ? fixed : free)
        .push_back(j);
  }
  lp::System sys;
  sys.eq.resize(static_cast<Eigen::Index>(fixed.size()), problem.n());
  sys.eq_rhs.resize(static_cast<Eigen::Index>(fixed.size()));
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    const int j = fixed[k];
    sys.eq.row(static_cast<Eigen::Index>(k)) = x.col(j).transpose();
    sys.eq_rhs(static_cast<Eigen::Index>(k)) = face.constraints()[static_cast<std::size_t>(j)].value;
  }
  sys.le.resize(2 * static_cast<Eigen::Index>(free.size()), problem.n());
  sys.le_rhs.resize(2 * static_cast<Eigen::Index>(free.size()));
  for (std::size_t k = 0; k < free.size(); ++k) {
    const int j = free[k];
    const double lam = face.constraints()[static_cast<std::size_t>(j)].half_width;
    const auto r = static_cast<Eigen::Index>(2 * k);
    sys.le.row(r) = x.col(j).transpose();
    sys.le.row(r + 1) = -x.col(j).transpose();
    sys.le_rhs(r) = lam;
    sys.le_rhs(r + 1) = lam;
  }
  lp::Options lopt;
  lopt.feasibility_tol = opt.feasibility_tol;
  auto z = lp::find_feasible_point(sys, lopt);
  if (!z) return std::nullopt;
  FaceWitness w;
  w.model = face.model();
  for (int j : face.model()) {
    const double val = face.constraints()[static_cast<std::size_t>(j)].value;
    w.signs.push_back(val < 0 ? -1 : 1);
  }
  w.z = *z;
  w.v = x.transpose() * (*z);
  return w;
}

namespace detail {

inline void check_model(const DesignProblem& problem, const IndexSet& model) {
  for (std::size_t k = 0; k < model.size(); ++k) {
    if (model[k] < 0 || model[k] >= problem.p()) throw InputError("model index out of range");
    if (k > 0 && model[k] <= model[k - 1]) throw InputError("model indices must be strictly increasing");
  }
}

// Visits every sign resolution of B_M in a fixed order; unpenalized members
// have a single resolution. Stops at the first feasible face.
inline std::optional<FaceWitness> first_intersecting_face(const DesignProblem& problem,
                                                          const TuningVector& tuning, const IndexSet& model,
                                                          const GeometryOptions& opt) {
  std::vector<std::size_t> free_signs;
  for (std::size_t k = 0; k < model.size(); ++k) {
    if (tuning.penalized(model[k])) free_signs.push_back(k);
  }
  const std::uint64_t patterns = std::uint64_t{1} << free_signs.size();
  std::vector<int> signs(model.size(), 1);
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    for (std::size_t t = 0; t < free_signs.size(); ++t) {
      signs[free_signs[t]] = (mask >> (free_signs.size() - 1 - t)) & 1U ? -1 : 1;
    }
    FaceBox face(tuning, model, signs);
    if (auto w = face_intersects_row_space(problem, face, opt)) return w;
  }
  return std::nullopt;
}

}  // namespace detail

/// Some y makes the Lasso select exactly `model` iff col(X') meets B_M.
/// Returns the intersecting face with its certificate, if any.
inline std::optional<FaceWitness> selecting_face(const DesignProblem& problem, const TuningVector& tuning,
                                                 const IndexSet& model, const GeometryOptions& opt = {}) {
  check_tuning(problem, tuning);
  detail::check_model(problem, model);
  if (static_cast<int>(model.size()) > opt.selectable_limit) {
    throw LimitError("model has " + std::to_string(model.size()) + " indices; sign enumeration is capped at " +
                     std::to_string(opt.selectable_limit));
  }
  return detail::first_intersecting_face(problem, tuning, model, opt);
}

inline bool selectable(const DesignProblem& problem, const TuningVector& tuning, const IndexSet& model,
                       const GeometryOptions& opt = {}) {
  return selecting_face(problem, tuning, model, opt).has_value();
}

struct StructuralSet {
  IndexSet indices;
  /// Certificate per member, aligned with `indices`.
  std::vector<FaceWitness> certificates;
};

/// Coordinates j for which col(X') meets the facet pair B_{j}; exactly the
/// coordinates that are non-zero in some Lasso solution for some y.
inline StructuralSet structural_set_with_certificates(const DesignProblem& problem, const TuningVector& tuning,
                                                      const GeometryOptions& opt = {}) {
  check_tuning(problem, tuning);
  StructuralSet out;
  for (int j = 0; j < problem.p(); ++j) {
    for (int s : {1, -1}) {
      FaceBox face(tuning, IndexSet{j}, std::vector<int>{s});
      if (auto w = face_intersects_row_space(problem, face, opt)) {
        out.indices.push_back(j);
        out.certificates.push_back(std::move(*w));
        break;
      }
      if (!tuning.penalized(j)) break;
    }
  }
  return out;
}

inline IndexSet structural_set(const DesignProblem& problem, const TuningVector& tuning,
                               const GeometryOptions& opt = {}) {
  return structural_set_with_certificates(problem, tuning, opt).indices;
}

/// Two distinct solutions b != b_tilde of the same Lasso problem at y.
struct NonuniquenessWitness {
  VectorXd y;
  VectorXd b;
  VectorXd b_tilde;
};

struct UniquenessVerdict {
  bool unique = true;
  std::optional<NonuniquenessWitness> witness;
  std::optional<FaceWitness> violating_face;
};

/// Builds two distinct solutions at a common y from a face B_M with
/// |M| > rk(X) that meets col(X') at v = X'z.
///
/// Picks the first j in M (ascending) whose column is a combination
/// d X_j = sum_l c_l X_l of the other columns of X_M, with d = sgn(v_j)
/// (d = 1 when lambda_j = 0), and sets c = max |c_l|. Then
///   b_j = d / (2c),   b_l = sgn(v_l) on M \ {j},   y = z + X b,
///   b~_j = 0,         b~_l = b_l + c_l / (2c).
/// Both satisfy X'y - X'X b = v, which certifies optimality, and X b = X b~.
/// A zero column with lambda_j = 0 leaves its coefficient arbitrary, which
/// gives the witness directly.
inline NonuniquenessWitness construct_nonuniqueness_witness(const DesignProblem& problem,
                                                            const TuningVector& tuning, const IndexSet& model,
                                                            const VectorXd& v, const VectorXd& z) {
  check_tuning(problem, tuning);
  detail::check_model(problem, model);
  if (static_cast<int>(model.size()) <= problem.rank()) {
    throw InputError("witness construction needs |M| > rk(X)");
  }
  if (!ModelFace(tuning, model).contains(v, 1e-7)) throw InputError("v does not lie in the face B_M");
  if ((problem.x().transpose() * z - v).cwiseAbs().maxCoeff() > 1e-7 * (1.0 + v.cwiseAbs().maxCoeff())) {
    throw InputError("v is not X'z for the given certificate z");
  }
  const MatrixXd& x = problem.x();
  const double scale = x.cwiseAbs().maxCoeff();
  auto sgn = [](double a) { return a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0); };

  for (std::size_t pos = 0; pos < model.size(); ++pos) {
    const int j = model[pos];
    const double col_norm = x.col(j).norm();
    if (col_norm <= 1e-14 * (1.0 + scale)) {
      if (tuning.penalized(j)) continue;
      NonuniquenessWitness w;
      w.y = z;
      w.b = solve(problem, w.y, tuning).b;
      w.b_tilde = w.b;
      w.b_tilde(j) += 1.0;
      return w;
    }
    IndexSet others;
    for (int l : model) {
      if (l != j) others.push_back(l);
    }
    MatrixXd xo(problem.n(), static_cast<Eigen::Index>(others.size()));
    for (std::size_t k = 0; k < others.size(); ++k) xo.col(static_cast<Eigen::Index>(k)) = x.col(others[k]);
    const double d = tuning.penalized(j) ? sgn(v(j)) : 1.0;
    if (d == 0.0) continue;
    const VectorXd target = d * x.col(j);
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(xo);
    const VectorXd c = cod.solve(target);
    if ((xo * c - target).norm() > 1e-9 * (1.0 + col_norm)) continue;
    const double cmax = c.cwiseAbs().maxCoeff();
    if (!(cmax > 0.0)) continue;

    NonuniquenessWitness w;
    w.b = VectorXd::Zero(problem.p());
    w.b(j) = d / (2.0 * cmax);
    for (int l : others) w.b(l) = sgn(v(l));
    w.b_tilde = w.b;
    w.b_tilde(j) = 0.0;
    for (std::size_t k = 0; k < others.size(); ++k) {
      w.b_tilde(others[k]) += c(static_cast<Eigen::Index>(k)) / (2.0 * cmax);
    }
    w.y = z + x * w.b;
    return w;
  }
  throw NumericalError("no column of X_M admits the required dependence; face certificate is inconsistent");
}

/// The Lasso solution is unique for every y iff col(X') misses B_M for all
/// |M| > rk(X). By face nesting it suffices to scan |M| = rk(X) + 1.
inline UniquenessVerdict check_uniqueness(const DesignProblem& problem, const TuningVector& tuning,
                                          const GeometryOptions& opt = {}) {
  check_tuning(problem, tuning);
  const int p = problem.p();
  const int k = problem.rank() + 1;
  UniquenessVerdict verdict;
  if (k > p) return verdict;
  if (p > opt.uniqueness_limit) {
    throw LimitError("check_uniqueness enumerates faces only for p <= " + std::to_string(opt.uniqueness_limit) +
                     "; use general_position as a sufficient test");
  }
  IndexSet model(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) model[static_cast<std::size_t>(i)] = i;
  while (true) {
    if (auto face = detail::first_intersecting_face(problem, tuning, model, opt)) {
      verdict.unique = false;
      verdict.witness = construct_nonuniqueness_witness(problem, tuning, face->model, face->v, face->z);
      verdict.violating_face = std::move(*face);
      return verdict;
    }
    int i = k - 1;
    while (i >= 0 && model[static_cast<std::size_t>(i)] == p - k + i) --i;
    if (i < 0) break;
    ++model[static_cast<std::size_t>(i)];
    for (int t = i + 1; t < k; ++t) model[static_cast<std::size_t>(t)] = model[static_cast<std::size_t>(t - 1)] + 1;
  }
  return verdict;
}

/// No k-dimensional affine subspace (k < min(n, p)) holds more than k + 1 of
/// the signed columns +-X_j, counting at most one of each antipodal pair.
/// Checked exhaustively: every signed subset of size s = k + 2 must be
/// affinely independent.
inline bool general_position(const DesignProblem& problem, const GeometryOptions& opt = {}) {
  const int p = problem.p();
  const int n = problem.n();
  if (p > opt.general_position_limit) {
    throw LimitError("general_position enumerates subsets only for p <= " +
                     std::to_string(opt.general_position_limit));
  }
  const MatrixXd& x = problem.x();
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  const int smax = std::min(std::min(n, p) + 1, p);
  for (int s = 2; s <= smax; ++s) {
    IndexSet subset(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) subset[static_cast<std::size_t>(i)] = i;
    while (true) {
      // The first sign can be fixed: negating the whole set maps affine
      // subspaces onto affine subspaces.
      const std::uint32_t patterns = 1U << (s - 1);
      for (std::uint32_t mask = 0; mask < patterns; ++mask) {
        MatrixXd diffs(n, s - 1);
        const VectorXd base = x.col(subset[0]);
        for (int t = 1; t < s; ++t) {
          const double sg = (mask >> (t - 1)) & 1U ? -1.0 : 1.0;
          diffs.col(t - 1) = sg * x.col(subset[static_cast<std::size_t>(t)]) - base;
        }
        Eigen::JacobiSVD<MatrixXd> svd(diffs);
        const VectorXd& sv = svd.singularValues();
        int rank = 0;
        for (Eigen::Index q = 0; q < sv.size(); ++q) {
          if (sv(q) > 1e-10 * scale) ++rank;
        }
        if (rank < s - 1) return false;
      }
      int i = s - 1;
      while (i >= 0 && subset[static_cast<std::size_t>(i)] == p - s + i) --i;
      if (i < 0) break;
      ++subset[static_cast<std::size_t>(i)];
      for (int t = i + 1; t < s; ++t) subset[static_cast<std::size_t>(t)] = subset[static_cast<std::size_t>(t - 1)] + 1;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Shrinkage areas.
// ---------------------------------------------------------------------------

/// S-bar(b) = X'X b + prod_j B_j(b_j): the values of X'y for which b solves
/// the Lasso. When built for a full-rank design it also answers membership of
/// least-squares points z through X'y = X'X z.
struct ShrinkageSet {
  VectorXd center;
  FaceBox box;
  VectorXd b;
  std::optional<MatrixXd> gram;  // set for the low-dimensional form

  bool contains(const VectorXd& xty, double tol = 1e-9) const { return box.contains(xty - center, tol); }

  /// Low-dimensional membership z in S(b); requires the low-dimensional form.
  bool contains_ls(const VectorXd& z, double tol = 1e-9) const {
    if (!gram) throw PreconditionError("least-squares membership needs a full-rank shrinkage set");
    return contains(*gram * z, tol);
  }
};

inline ShrinkageSet shrinkage_set_high(const DesignProblem& problem, const TuningVector& tuning, const VectorXd& b,
                                       double zero_tol = kDefaultZeroTol) {
  check_tuning(problem, tuning);
  if (b.size() != problem.p()) throw InputError("b must have length p");
  return ShrinkageSet{problem.gram() * b, FaceBox::from_point(tuning, b, zero_tol), b, std::nullopt};
}

inline ShrinkageSet shrinkage_set_low(const DesignProblem& problem, const TuningVector& tuning, const VectorXd& b,
                                      double zero_tol = kDefaultZeroTol) {
  if (!problem.full_column_rank()) {
    throw PreconditionError("shrinkage_set_low needs full column rank; use shrinkage_set_high");
  }
  ShrinkageSet s = shrinkage_set_high(problem, tuning, b, zero_tol);
  s.gram = problem.gram();
  return s;
}

/// For b with every coordinate non-zero, S(b) is the single point
/// b + (X'X)^{-1} (sgn(b) * lambda); equivalently b = z_ls - (X'X)^{-1}(sgn(b) * lambda).
inline VectorXd singleton_ls_point(const DesignProblem& problem, const TuningVector& tuning, const VectorXd& b) {
  if (!problem.full_column_rank()) throw PreconditionError("singleton shrinkage area needs full column rank");
  VectorXd shift(problem.p());
  for (int j = 0; j < problem.p(); ++j) {
    if (b(j) == 0.0) throw InputError("singleton form requires every b_j != 0");
    shift(j) = (b(j) > 0 ? 1.0 : -1.0) * tuning[j];
  }
  return b + problem.gram().ldlt().solve(shift);
}

/// The Lasso estimate produced when the least-squares estimate equals z_ls,
/// i.e. the unique b with z_ls in S(b).
inline LassoSolution map_ls_to_lasso(const DesignProblem& problem, const TuningVector& tuning, const VectorXd& z_ls,
                                     const SolverOptions& opt = {}) {
  if (!problem.full_column_rank()) throw PreconditionError("map_ls_to_lasso needs full column rank");
  check_tuning(problem, tuning);
  if (z_ls.size() != problem.p()) throw InputError("z_ls must have length p");
  const VectorXd y = problem.x() * z_ls;
  LassoSolution sol = solve(problem, y, tuning, opt);
  const ShrinkageSet s = shrinkage_set_low(problem, tuning, sol.b, opt.zero_tol);
  const double tol = std::max(1e-8, 1e3 * opt.tol) * (1.0 + z_ls.cwiseAbs().maxCoeff());
  if (!s.contains_ls(z_ls, tol)) {
    throw NumericalError("least-squares point is not in the shrinkage area of the computed Lasso estimate");
  }
  return sol;
}

}  // namespace lassodist
