#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "lassodist/errors.hpp"
#include "lassodist/normal.hpp"
#include "lassodist/probability.hpp"
#include "lassodist/rng.hpp"

namespace lassodist {

struct MvnOptions {
  /// Target absolute accuracy (3 standard errors of the QMC estimate).
  double precision = 1e-5;
  std::uint64_t seed = 20170301;
  int shifts = 8;
  std::int64_t max_points = std::int64_t{1} << 20;
  std::int64_t max_mc_samples = 4'000'000;
};

namespace detail {

inline constexpr std::array<int, 20> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                                31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

// Genz's separation-of-variables integrand for P(a <= m + L t <= b),
// t ~ N(0, I), L lower-triangular with positive diagonal.
inline double genz_integrand(const Eigen::MatrixXd& l, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                             const double* w, std::vector<double>& y) {
  const Eigen::Index p = l.rows();
  double f = 1.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) s += l(i, j) * y[static_cast<std::size_t>(j)];
    const double d = normal::cdf((a(i) - s) / l(i, i));
    const double e = normal::cdf((b(i) - s) / l(i, i));
    const double width = e - d;
    if (width <= 0.0) return 0.0;
    f *= width;
    if (i + 1 < p) {
      double u = d + w[i] * width;
      u = std::clamp(u, 1e-300, 1.0 - 1e-16);
      y[static_cast<std::size_t>(i)] = normal::quantile(u);
    }
  }
  return f;
}

}  // namespace detail

/// P(lower <= X <= upper) for X ~ N(mean, cov). Infinite bounds are allowed.
///
/// Non-singular covariance: randomized rank-1 lattice QMC on Genz's
/// transformed integrand, with `shifts` independent random shifts giving a
/// spread-based standard error; the point count doubles until three standard
/// errors fall below the requested precision.
/// Singular covariance is reduced to its rank r: r = 0 and r = 1 are exact,
/// larger r falls back to plain Monte Carlo in the reduced coordinates.
inline RegionProbability mvn_box_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                             const MvnOptions& opt = {}) {
  const Eigen::Index p = mean.size();
  if (cov.rows() != p || cov.cols() != p || lower.size() != p || upper.size() != p) {
    throw InputError("mvn_box_probability: dimension mismatch");
  }
  if (p == 0) return RegionProbability::exact(1.0, 0.0);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i)) {
      throw InputError("mvn_box_probability: need lower <= upper");
    }
  }
  if (!cov.allFinite() || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + cov.cwiseAbs().maxCoeff())) {
    throw InputError("covariance must be finite and symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double emax = std::max(0.0, ev.maxCoeff());
  if (ev.minCoeff() < -1e-10 * std::max(1.0, emax)) throw InputError("covariance is not positive semidefinite");
  const double cut = 1e-12 * std::max(1.0, emax) * static_cast<double>(p);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < p; ++k) {
    if (ev(k) > cut) keep.push_back(k);
  }
  const auto r = static_cast<Eigen::Index>(keep.size());
  const Eigen::VectorXd a = lower - mean;
  const Eigen::VectorXd b = upper - mean;

  if (r == p) {
    const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    const Eigen::Index dims = std::max<Eigen::Index>(p - 1, 1);
    std::vector<double> alpha(static_cast<std::size_t>(dims));
    for (Eigen::Index j = 0; j < dims; ++j) {
      alpha[static_cast<std::size_t>(j)] = std::sqrt(static_cast<double>(detail::kPrimes[static_cast<std::size_t>(j % 20)])) *
                                           (1.0 + static_cast<double>(j / 20));
    }
    std::vector<std::vector<double>> shift(static_cast<std::size_t>(opt.shifts));
    for (int k = 0; k < opt.shifts; ++k) {
      rng::Stream s(opt.seed, static_cast<std::uint64_t>(k));
      for (Eigen::Index j = 0; j < dims; ++j) shift[static_cast<std::size_t>(k)].push_back(s.uniform());
    }
    std::vector<double> sums(static_cast<std::size_t>(opt.shifts), 0.0);
    std::vector<double> w(static_cast<std::size_t>(dims));
    std::vector<double> y(static_cast<std::size_t>(p));
    std::int64_t done = 0;
    std::int64_t target = 1024;
    double estimate = 0.0, se = 0.0;
    while (true) {
      for (int k = 0; k < opt.shifts; ++k) {
        for (std::int64_t i = done + 1; i <= target; ++i) {
          for (Eigen::Index j = 0; j < dims; ++j) {
            double x = static_cast<double>(i) * alpha[static_cast<std::size_t>(j)] +
                       shift[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            x -= std::floor(x);
            w[static_cast<std::size_t>(j)] = std::abs(2.0 * x - 1.0);
          }
          sums[static_cast<std::size_t>(k)] += detail::genz_integrand(l, a, b, w.data(), y);
        }
      }
      done = target;
      double m = 0.0;
      for (double s : sums) m += s / static_cast<double>(done);
      m /= opt.shifts;
      double var = 0.0;
      for (double s : sums) {
        const double e = s / static_cast<double>(done) - m;
        var += e * e;
      }
      var /= static_cast<double>(opt.shifts - 1);
      estimate = m;
      se = std::sqrt(var / opt.shifts);
      if (3.0 * se <= opt.precision || 2 * target > opt.max_points) break;
      target *= 2;
    }
    RegionProbability out = RegionProbability::exact(estimate, opt.precision);
    out.std_error = se;
    out.n_samples = done * opt.shifts;
    out.seed = opt.seed;
    return out;
  }

  // Reduced-rank representation X - mean = F t, t ~ N(0, I_r).
  Eigen::MatrixXd f(p, r);
  for (Eigen::Index k = 0; k < r; ++k) {
    f.col(k) = eig.eigenvectors().col(keep[static_cast<std::size_t>(k)]) * std::sqrt(ev(keep[static_cast<std::size_t>(k)]));
  }
  double bound_scale = 1.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (std::isfinite(a(i))) bound_scale = std::max(bound_scale, std::abs(a(i)));
    if (std::isfinite(b(i))) bound_scale = std::max(bound_scale, std::abs(b(i)));
  }
  const double slack = 1e-12 * bound_scale;
  if (r == 0) {
    for (Eigen::Index i = 0; i < p; ++i) {
      if (a(i) > slack || b(i) < -slack) return RegionProbability::exact(0.0, 0.0);
    }
    return RegionProbability::exact(1.0, 0.0);
  }
  if (r == 1) {
    // a_i <= f_i t <= b_i for every row: an interval in t.
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    const double fscale = f.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < p; ++i) {
      const double fi = f(i, 0);
      if (std::abs(fi) <= 1e-12 * fscale) {
        if (a(i) > slack || b(i) < -slack) return RegionProbability::exact(0.0, 0.0);
        continue;
      }
      const double t1 = a(i) / fi;
      const double t2 = b(i) / fi;
      lo = std::max(lo, std::min(t1, t2));
      hi = std::min(hi, std::max(t1, t2));
    }
    if (!(hi > lo)) return RegionProbability::exact(0.0, 0.0);
    return RegionProbability::exact(normal::cdf(hi) - normal::cdf(lo), 0.0);
  }

  std::int64_t n = static_cast<std::int64_t>(std::ceil(2.25 / (opt.precision * opt.precision)));
  n = std::clamp<std::int64_t>(n, 10'000, opt.max_mc_samples);
  std::int64_t hits = 0;
  Eigen::VectorXd t(r);
  for (std::int64_t i = 0; i < n; ++i) {
    rng::Stream s(opt.seed, static_cast<std::uint64_t>(i));
    for (Eigen::Index k = 0; k < r; ++k) t(k) = s.normal();
    const Eigen::VectorXd x = f * t;
    bool in = true;
    for (Eigen::Index k = 0; k < p && in; ++k) in = x(k) >= a(k) && x(k) <= b(k);
    hits += in ? 1 : 0;
  }
  return RegionProbability::from_counts(hits, n, opt.seed);
}

}  // namespace lassodist
