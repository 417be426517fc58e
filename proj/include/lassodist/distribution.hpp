#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lassodist/errors.hpp"
#include "lassodist/model.hpp"
#include "lassodist/monte_carlo.hpp"
#include "lassodist/mvn.hpp"
#include "lassodist/normal.hpp"
#include "lassodist/probability.hpp"
#include "lassodist/quadrature.hpp"
#include "lassodist/solver.hpp"

namespace lassodist {

struct DistributionOptions {
  Method method = Method::Quadrature;
  /// Absolute accuracy target of quadrature / QMC results.
  double quad_tol = 1e-6;
  std::int64_t samples = 100000;
  std::uint64_t seed = 1;
  SolverOptions solver{};
  int workers = 0;
  int max_quad_dim = 6;
  int max_cdf_dim = 4;
};

/// Event on the estimation error u = b - beta (Kind::Error, signs d = sgn(z + beta))
/// or on the estimator itself (Kind::Estimator, signs d = sgn(z)):
/// coordinate <= z_j on D-, >= z_j on D+, = z_j on D0.
struct OrthantEvent {
  enum class Kind { Error, Estimator };
  VectorXd z;
  SignVector d;
  Kind kind = Kind::Estimator;

  static OrthantEvent estimator(const VectorXd& z) { return {z, sign_partition(z, 0.0), Kind::Estimator}; }
  static OrthantEvent error(const VectorXd& z, const VectorXd& beta) {
    return {z, sign_partition(z + beta, 0.0), Kind::Error};
  }

  /// Thresholds on u = b - beta.
  VectorXd error_thresholds(const VectorXd& beta) const { return kind == Kind::Error ? z : VectorXd(z - beta); }
};

namespace detail {

// Density of W = X'eps ~ N(0, sigma^2 X'X) in the coordinates (m_{D-+}, s_{D0})
// of the orthant decomposition W = X'X m_beta + s_lambda.
class OrthantKernel {
 public:
  OrthantKernel(const DesignProblem& problem, const GaussianModel& model, const TuningVector& tuning)
      : gram_(problem.gram()), beta_(model.beta), lambda_(tuning.lambda()), sigma_(model.sigma) {
    if (!problem.full_column_rank()) {
      throw PreconditionError("quadrature requires X of full column rank; use --method mc");
    }
    check_tuning(problem, tuning);
    Eigen::LLT<MatrixXd> llt(sigma_ * sigma_ * gram_);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance sigma^2 X'X is not positive definite");
    lchol_ = llt.matrixL();
    log_norm_ = -0.5 * static_cast<double>(gram_.rows()) * std::log(2.0 * std::numbers::pi);
    for (Eigen::Index i = 0; i < gram_.rows(); ++i) log_norm_ -= std::log(lchol_(i, i));
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram_);
    tail_scale_ = 2.0 * sigma_ / std::sqrt(eig.eigenvalues().minCoeff());
  }

  int p() const { return static_cast<int>(gram_.rows()); }
  double tail_scale() const { return tail_scale_; }
  const VectorXd& beta() const { return beta_; }
  const VectorXd& lambda() const { return lambda_; }

  // |det| of the change of variables (m_{D-+}, s_{D0}) -> W.
  double jacobian(const SignVector& d) const {
    const IndexSet a = d.active();
    if (a.empty()) return 1.0;
    MatrixXd sub(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t k = 0; k < a.size(); ++k) sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = gram_(a[i], a[k]);
    }
    return std::abs(sub.determinant());
  }

  // phi_{(0, sigma^2 G)}(G m_beta + s_lambda); `m` holds the active
  // coordinates in ascending order, `s` the D0 coordinates.
  double density(const SignVector& d, std::span<const double> m, std::span<const double> s) const {
    VectorXd mb(p()), sl(p());
    std::size_t ia = 0, iz = 0;
    for (int j = 0; j < p(); ++j) {
      if (d[j] == 0) {
        mb(j) = -beta_(j);
        sl(j) = s[iz++];
      } else {
        mb(j) = m[ia++];
        sl(j) = d[j] * lambda_(j);
      }
    }
    const VectorXd w = gram_ * mb + sl;
    const VectorXd t = lchol_.triangularView<Eigen::Lower>().solve(w);
    return std::exp(log_norm_ - 0.5 * t.squaredNorm());
  }

 private:
  MatrixXd gram_;
  VectorXd beta_;
  VectorXd lambda_;
  double sigma_;
  MatrixXd lchol_;
  double log_norm_ = 0.0;
  double tail_scale_ = 1.0;
};

// Integral of the kernel over the given active-coordinate ranges and the
// lambda-box on D0, including the Jacobian.
inline double orthant_piece(const OrthantKernel& k, const SignVector& d, const std::vector<quad::Axis>& active,
                            const DistributionOptions& opt) {
  std::vector<quad::Axis> axes = active;
  for (int j : d.zero()) axes.push_back({-k.lambda()(j), k.lambda()(j), 1.0});
  if (static_cast<int>(axes.size()) > opt.max_quad_dim) {
    throw LimitError("quadrature dimension " + std::to_string(axes.size()) + " exceeds " +
                     std::to_string(opt.max_quad_dim) + "; use --method mc");
  }
  const std::size_t na = active.size();
  auto f = [&](std::span<const double> pt) { return k.density(d, pt.subspan(0, na), pt.subspan(na)); };
  quad::Options q;
  q.tol = opt.quad_tol;
  return k.jacobian(d) * quad::integrate(f, axes, q);
}

inline RegionProbability mc_probability(const DesignProblem& problem, const GaussianModel& model,
                                        const TuningVector& tuning, const DistributionOptions& opt,
                                        const std::function<bool(const VectorXd&)>& event) {
  if (opt.samples < 1) throw InputError("sample count must be positive");
  // 0 = miss, 1 = hit, 2 = solver failure
  const std::function<char(std::int64_t)> fn = [&](std::int64_t rep) -> char {
    const mc::Replicate r = mc::run_replicate(problem, model, tuning, opt.seed, rep, opt.solver);
    if (!r.solution) return 2;
    return event(r.solution->b) ? 1 : 0;
  };
  const std::vector<char> out = mc::map_replicates<char>(opt.samples, opt.workers, fn);
  std::int64_t hits = 0, failures = 0;
  for (char c : out) {
    hits += c == 1;
    failures += c == 2;
  }
  if (static_cast<double>(failures) > mc::kMaxFailureRate * static_cast<double>(opt.samples)) {
    throw NumericalError(std::to_string(failures) + " of " + std::to_string(opt.samples) +
                         " replicates failed to converge");
  }
  return RegionProbability::from_counts(hits, opt.samples - failures, opt.seed);
}

inline void check_model(const DesignProblem& problem, const GaussianModel& model) {
  if (model.beta.size() != problem.p()) throw InputError("beta must have length p");
  if (model.mu.size() != problem.n()) throw InputError("mu must have length n");
  if (!(model.sigma > 0.0)) throw InputError("sigma must be positive");
}

}  // namespace detail

/// P(u_j <= t_j on D-, u_j >= t_j on D+, b_j = 0 on D0) for the event's
/// thresholds t on u = b - beta.
inline RegionProbability prob_orthant_event(const DesignProblem& problem, const GaussianModel& model,
                                            const TuningVector& tuning, const OrthantEvent& event,
                                            const DistributionOptions& opt = {}) {
  detail::check_model(problem, model);
  check_tuning(problem, tuning);
  if (event.z.size() != problem.p() || event.d.size() != problem.p()) throw InputError("z and d must have length p");
  const VectorXd shifted = event.kind == OrthantEvent::Kind::Error ? VectorXd(event.z + model.beta) : event.z;
  if (!(sign_partition(shifted, 0.0) == event.d)) {
    throw InputError(event.kind == OrthantEvent::Kind::Error ? "sign vector must equal sgn(z + beta)"
                                                             : "sign vector must equal sgn(z)");
  }
  const VectorXd t = event.error_thresholds(model.beta);
  const SignVector& d = event.d;

  if (opt.method == Method::MonteCarlo) {
    const double zt = opt.solver.zero_tol;
    return detail::mc_probability(problem, model, tuning, opt, [&](const VectorXd& b) {
      for (int j = 0; j < problem.p(); ++j) {
        const double u = b(j) - model.beta(j);
        if (d[j] < 0 && !(u <= t(j))) return false;
        if (d[j] > 0 && !(u >= t(j))) return false;
        if (d[j] == 0 && std::abs(b(j)) > zt) return false;
      }
      return true;
    });
  }
  const detail::OrthantKernel k(problem, model, tuning);
  std::vector<quad::Axis> active;
  for (int j : d.active()) {
    if (d[j] < 0) active.push_back({-quad::kInf, t(j), k.tail_scale()});
    else active.push_back({t(j), quad::kInf, k.tail_scale()});
  }
  return RegionProbability::exact(detail::orthant_piece(k, d, active, opt), opt.quad_tol);
}

/// P(sgn(b) = d), the mass of the orthant O^d.
inline RegionProbability prob_sign_pattern(const DesignProblem& problem, const GaussianModel& model,
                                           const TuningVector& tuning, const SignVector& d,
                                           const DistributionOptions& opt = {}) {
  detail::check_model(problem, model);
  check_tuning(problem, tuning);
  if (d.size() != problem.p()) throw InputError("d must have length p");
  if (opt.method == Method::MonteCarlo) {
    return detail::mc_probability(problem, model, tuning, opt, [&](const VectorXd& b) {
      return sign_partition(b, opt.solver.zero_tol) == d;
    });
  }
  const detail::OrthantKernel k(problem, model, tuning);
  std::vector<quad::Axis> active;
  for (int j : d.active()) {
    if (d[j] < 0) active.push_back({-quad::kInf, -model.beta(j), k.tail_scale()});
    else active.push_back({-model.beta(j), quad::kInf, k.tail_scale()});
  }
  return RegionProbability::exact(detail::orthant_piece(k, d, active, opt), opt.quad_tol);
}

/// P(b = 0): a Gaussian box probability for X'y ~ N(X'mu, sigma^2 X'X) over
/// the lambda-box. Singular X'X is handled in reduced coordinates.
inline RegionProbability prob_all_zero(const DesignProblem& problem, const GaussianModel& model,
                                       const TuningVector& tuning, const DistributionOptions& opt = {}) {
  detail::check_model(problem, model);
  check_tuning(problem, tuning);
  if (opt.method == Method::MonteCarlo) {
    return detail::mc_probability(problem, model, tuning, opt, [&](const VectorXd& b) {
      return b.cwiseAbs().maxCoeff() <= opt.solver.zero_tol;
    });
  }
  MvnOptions m;
  m.precision = std::max(opt.quad_tol, 1e-7);
  m.seed = opt.seed;
  const VectorXd mean = problem.x().transpose() * model.mu;
  const MatrixXd cov = model.sigma * model.sigma * problem.gram();
  return mvn_box_probability(mean, cov, -tuning.lambda(), tuning.lambda(), m);
}

/// Unnormalized density piece h^d of the estimation error restricted to O^d,
/// as a function of the active coordinates (ascending index order).
inline double density_piece(const DesignProblem& problem, const GaussianModel& model, const TuningVector& tuning,
                            const SignVector& d, const VectorXd& m_active, const DistributionOptions& opt = {}) {
  detail::check_model(problem, model);
  if (d.size() != problem.p()) throw InputError("d must have length p");
  if (m_active.size() != d.l1()) throw InputError("point must have one entry per nonzero sign");
  const IndexSet a = d.active();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = m_active(static_cast<Eigen::Index>(i)) + model.beta(a[i]);
    if (!(d[a[i]] * v > 0.0)) return 0.0;
  }
  const detail::OrthantKernel k(problem, model, tuning);
  std::vector<quad::Axis> fixed;
  for (Eigen::Index i = 0; i < m_active.size(); ++i) fixed.push_back({m_active(i), m_active(i), 1.0});
  // Degenerate axes integrate to zero, so evaluate the D0 box directly.
  std::vector<quad::Axis> box;
  for (int j : d.zero()) box.push_back({-tuning[j], tuning[j], 1.0});
  if (static_cast<int>(box.size()) > opt.max_quad_dim) throw LimitError("too many zero coordinates for quadrature");
  const std::vector<double> mv(m_active.data(), m_active.data() + m_active.size());
  auto f = [&](std::span<const double> s) { return k.density(d, mv, s); };
  quad::Options q;
  q.tol = opt.quad_tol;
  return k.jacobian(d) * quad::integrate(f, box, q);
}

/// Conditional density of the estimation error given sgn(b) = d, with the
/// normalizer computed once.
class ConditionalDensity {
 public:
  ConditionalDensity(const DesignProblem& problem, const GaussianModel& model, const TuningVector& tuning,
                     SignVector d, const DistributionOptions& opt = {})
      : problem_(problem), model_(model), tuning_(tuning), d_(std::move(d)), opt_(opt) {
    DistributionOptions q = opt;
    q.method = Method::Quadrature;
    normalizer_ = prob_sign_pattern(problem, model, tuning, d_, q).estimate;
    if (normalizer_ < 1e-12) {
      throw NumericalError("P(sgn(b) = d) is below 1e-12; the conditional density is undefined");
    }
  }

  double normalizer() const { return normalizer_; }
  double operator()(const VectorXd& m_active) const {
    return density_piece(problem_, model_, tuning_, d_, m_active, opt_) / normalizer_;
  }

 private:
  const DesignProblem& problem_;
  GaussianModel model_;
  TuningVector tuning_;
  SignVector d_;
  DistributionOptions opt_;
  double normalizer_ = 0.0;
};

inline double conditional_density(const DesignProblem& problem, const GaussianModel& model,
                                  const TuningVector& tuning, const SignVector& d, const VectorXd& m_active,
                                  const DistributionOptions& opt = {}) {
  return ConditionalDensity(problem, model, tuning, d, opt)(m_active);
}

/// F(z) = P(b - beta <= z componentwise).
inline RegionProbability cdf(const DesignProblem& problem, const GaussianModel& model, const TuningVector& tuning,
                             const VectorXd& z, const DistributionOptions& opt = {}) {
  detail::check_model(problem, model);
  check_tuning(problem, tuning);
  if (z.size() != problem.p()) throw InputError("z must have length p");
  if (z.hasNaN()) throw InputError("z has NaN entries");
  if (opt.method == Method::MonteCarlo) {
    return detail::mc_probability(problem, model, tuning, opt, [&](const VectorXd& b) {
      return ((b - model.beta).array() <= z.array()).all();
    });
  }
  if (problem.p() > opt.max_cdf_dim) {
    throw LimitError("cdf quadrature is limited to p <= " + std::to_string(opt.max_cdf_dim) +
                     "; use --method mc or the simulate subcommand");
  }
  const detail::OrthantKernel k(problem, model, tuning);
  double total = 0.0;
  for (const SignVector& d : SignVector::enumerate(problem.p())) {
    // On D0 the error is fixed at -beta_j and must itself lie below z_j.
    bool feasible = true;
    for (int j : d.zero()) feasible = feasible && -model.beta(j) <= z(j);
    if (!feasible) continue;
    std::vector<quad::Axis> active;
    for (int j : d.active()) {
      const double edge = -model.beta(j);
      if (d[j] < 0) active.push_back({-quad::kInf, std::min(z(j), edge), k.tail_scale()});
      else active.push_back({edge, z(j), k.tail_scale()});
    }
    bool empty = false;
    for (const auto& ax : active) empty = empty || ax.empty();
    if (empty) continue;
    DistributionOptions per = opt;
    per.quad_tol = opt.quad_tol / std::pow(3.0, problem.p());
    total += detail::orthant_piece(k, d, active, per);
  }
  return RegionProbability::exact(total, opt.quad_tol);
}

using SolutionPredicate = std::function<bool(const VectorXd&)>;

namespace detail {

// Lebesgue measure of {u in (0,1) : inside(u)} for a piecewise-constant
// indicator: a uniform grid locates changes, bisection refines them.
inline double indicator_measure(const std::function<bool(double)>& inside, int cells = 256) {
  auto clampu = [](double u) { return std::clamp(u, 1e-15, 1.0 - 1e-15); };
  double total = 0.0;
  bool prev = inside(clampu(0.0));
  double left = 0.0;
  for (int c = 1; c <= cells; ++c) {
    const double right = static_cast<double>(c) / cells;
    const bool cur = inside(clampu(right));
    if (cur == prev) {
      if (cur) total += right - left;
    } else {
      double lo = left, hi = right;
      for (int it = 0; it < 48; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (inside(mid) == prev) lo = mid;
        else hi = mid;
      }
      total += prev ? lo - left : right - lo;
    }
    prev = cur;
    left = right;
  }
  return total;
}

}  // namespace detail

/// P(b in B) for any rank of X, where b is the solver's solution and B is
/// given by `region`. Depends on beta only through mu = X beta. The
/// quadrature path integrates over the r-dimensional X'eps = U diag(sv) t,
/// t ~ N(0, sigma^2 I_r), for r <= 2 and falls back to Monte Carlo above.
inline RegionProbability prob_region_high(const DesignProblem& problem, const GaussianModel& model,
                                          const TuningVector& tuning, const SolutionPredicate& region,
                                          const DistributionOptions& opt = {}) {
  detail::check_model(problem, model);
  check_tuning(problem, tuning);
  const int r = problem.rank();
  if (opt.method == Method::MonteCarlo || r > 2) {
    DistributionOptions m = opt;
    m.method = Method::MonteCarlo;
    return detail::mc_probability(problem, model, tuning, m, region);
  }
  const VectorXd center = problem.x().transpose() * model.mu;
  auto hit = [&](const VectorXd& xty) {
    return region(solve_gram(problem.gram(), xty, tuning, opt.solver).b);
  };
  if (r == 0) return RegionProbability::exact(hit(center) ? 1.0 : 0.0, 0.0);
  const MatrixXd u = problem.row_space_basis();
  const VectorXd scale = model.sigma * problem.row_space_scales();
  if (r == 1) {
    const double m = detail::indicator_measure(
        [&](double q) { return hit(center + u.col(0) * (scale(0) * normal::quantile(q))); });
    return RegionProbability::exact(m, opt.quad_tol);
  }
  auto outer = [&](double q1) {
    const VectorXd base = center + u.col(0) * (scale(0) * normal::quantile(std::clamp(q1, 1e-15, 1.0 - 1e-15)));
    return detail::indicator_measure([&](double q2) { return hit(base + u.col(1) * (scale(1) * normal::quantile(q2))); });
  };
  double err = 0.0;
  const double m = quad::detail::Kronrod::integrate(outer, 0.0, 1.0, 8, opt.quad_tol, &err);
  return RegionProbability::exact(m, opt.quad_tol);
}

}  // namespace lassodist
