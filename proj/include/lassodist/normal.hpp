#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace lassodist::normal {

inline double pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double log_pdf(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi); }

inline double cdf(double x) {
  if (x == std::numeric_limits<double>::infinity()) return 1.0;
  if (x == -std::numeric_limits<double>::infinity()) return 0.0;
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Standard normal quantile; +-inf at the endpoints.
inline double quantile(double u) {
  if (u <= 0.0) return -std::numeric_limits<double>::infinity();
  if (u >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

}  // namespace lassodist::normal
