#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace lassodist {

enum class Method { Quadrature, MonteCarlo };

inline const char* method_name(Method m) { return m == Method::Quadrature ? "quadrature" : "monte-carlo"; }

/// A probability together with how it was obtained and how accurate it is.
/// Quadrature results carry std_error = 0 (or a QMC spread estimate) and the
/// requested quad_tol; Monte-Carlo results carry the binomial standard error.
struct RegionProbability {
  double estimate = 0.0;
  double std_error = 0.0;
  Method method = Method::Quadrature;
  std::int64_t n_samples = 0;
  std::uint64_t seed = 0;
  double quad_tol = 0.0;

  static RegionProbability from_counts(std::int64_t hits, std::int64_t n, std::uint64_t seed) {
    RegionProbability r;
    r.method = Method::MonteCarlo;
    r.n_samples = n;
    r.seed = seed;
    r.estimate = n > 0 ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
    r.std_error = n > 0 ? std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(n)) : 0.0;
    return r;
  }

  static RegionProbability exact(double value, double quad_tol) {
    RegionProbability r;
    r.estimate = value < 0.0 ? 0.0 : (value > 1.0 ? 1.0 : value);
    r.quad_tol = quad_tol;
    return r;
  }
};

}  // namespace lassodist
