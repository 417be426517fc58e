#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "lassodist/errors.hpp"
#include "lassodist/normal.hpp"

namespace lassodist::quad {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One integration axis [lo, hi]; either end may be infinite. Infinite ends
/// are mapped to a bounded interval through the normal quantile with scale
/// `tail_scale`, which should be a generous multiple of the integrand's
/// natural spread along that axis.
struct Axis {
  double lo = -kInf;
  double hi = kInf;
  double tail_scale = 1.0;

  bool empty() const { return !(hi > lo); }
};

struct Options {
  /// Target absolute accuracy of the whole integral; each axis receives
  /// tol / dimension, which is handed to the Kronrod estimator as a relative
  /// target (integrands here are non-negative).
  double tol = 1e-6;
  unsigned max_depth = 12;
};

namespace detail {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;

// Integrates g over one axis, substituting the quantile map on infinite ends.
inline double integrate_axis(const std::function<double(double)>& g, const Axis& ax, double tol,
                             unsigned depth) {
  if (ax.empty()) return 0.0;
  const bool lo_inf = std::isinf(ax.lo);
  const bool hi_inf = std::isinf(ax.hi);
  double err = 0.0;
  if (!lo_inf && !hi_inf) {
    return Kronrod::integrate(g, ax.lo, ax.hi, depth, tol, &err);
  }
  const double tau = ax.tail_scale;
  if (lo_inf && hi_inf) {
    // m = tau * Phi^{-1}(u), dm = tau / phi(Phi^{-1}(u)) du
    auto h = [&](double u) {
      const double q = normal::quantile(u);
      const double val = g(tau * q);
      if (val == 0.0) return 0.0;
      return val * tau * std::exp(-normal::log_pdf(q));
    };
    return Kronrod::integrate(h, 0.0, 1.0, depth, tol, &err);
  }
  // Half line: m = edge -/+ tau * t(u), t(u) = -Phi^{-1}(u / 2) in [0, inf),
  // dt/du = 1 / (2 phi(t)).
  const double edge = lo_inf ? ax.hi : ax.lo;
  const double dir = lo_inf ? -1.0 : 1.0;
  auto h = [&](double u) {
    const double t = -normal::quantile(0.5 * u);
    const double val = g(edge + dir * tau * t);
    if (val == 0.0) return 0.0;
    return val * tau * 0.5 * std::exp(-normal::log_pdf(t));
  };
  return Kronrod::integrate(h, 0.0, 1.0, depth, tol, &err);
}

inline double nest(const std::function<double(std::span<const double>)>& f, std::span<const Axis> axes,
                   std::vector<double>& point, std::size_t level, double tol, unsigned depth) {
  if (level == axes.size()) return f(point);
  auto inner = [&](double x) {
    point[level] = x;
    return nest(f, axes, point, level + 1, tol, depth);
  };
  return integrate_axis(inner, axes[level], tol, depth);
}

}  // namespace detail

/// Nested adaptive Gauss-Kronrod (7/15) integral of f over the product of
/// `axes`. The first axis is outermost.
inline double integrate(const std::function<double(std::span<const double>)>& f, std::span<const Axis> axes,
                        const Options& opt = {}) {
  if (axes.empty()) return f(std::span<const double>{});
  for (const Axis& a : axes) {
    if (a.empty()) return 0.0;
  }
  std::vector<double> point(axes.size(), 0.0);
  const double per_axis = opt.tol / static_cast<double>(axes.size());
  return detail::nest(f, axes, point, 0, per_axis, opt.max_depth);
}

}  // namespace lassodist::quad
