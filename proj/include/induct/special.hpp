#pragma once

#include <cmath>
#include <limits>

#include "induct/error.hpp"

namespace induct::special {

inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

/// Upper tail 1 - Phi(x), accurate for large positive x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

/// Inverse standard normal CDF by safeguarded Newton on log Phi.
/// Accurate to ~1e-15 relative over p in (1e-300, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    fail(ErrorCode::Internal, "normal_quantile: p outside (0,1)");
  if (p == 0.5) return 0.0;
  if (p > 0.5) return -normal_quantile(1.0 - p);

  const double target = std::log(p);
  double lo = -45.0, hi = 0.0;
  double x = -std::sqrt(-2.0 * target);  // asymptotic tail start
  for (int it = 0; it < 200; ++it) {
    const double cdf = normal_cdf(x);
    const double g = std::log(cdf) - target;
    if (g > 0.0) hi = x; else lo = x;
    const double step = -g * cdf / normal_pdf(x);
    double next = x + step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series expansion.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 1000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a,x)/Gamma(a).
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) fail(ErrorCode::Internal, "gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

/// Chi-square survival function with k degrees of freedom.
inline double chi2_sf(double x, double k) { return gamma_q(0.5 * k, 0.5 * x); }

}  // namespace induct::special
