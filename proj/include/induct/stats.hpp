#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "induct/error.hpp"
#include "induct/special.hpp"

namespace induct::stats {

/// Sufficient statistics for a ratio estimator sum(a_i)/sum(b_i); mergeable.
struct RatioAccumulator {
  std::size_t n = 0;
  double sum_a = 0.0;
  double sum_b = 0.0;
  double sum_a2 = 0.0;
  double sum_b2 = 0.0;
  double sum_ab = 0.0;

  void add(double a, double b) {
    ++n;
    sum_a += a;
    sum_b += b;
    sum_a2 += a * a;
    sum_b2 += b * b;
    sum_ab += a * b;
  }

  void merge(const RatioAccumulator& other) {
    n += other.n;
    sum_a += other.sum_a;
    sum_b += other.sum_b;
    sum_a2 += other.sum_a2;
    sum_b2 += other.sum_b2;
    sum_ab += other.sum_ab;
  }
};

struct CiResult {
  double estimate = 0.0;
  double half_width = 0.0;
};

/// Delta-method confidence interval for sum_a/sum_b at the given level.
inline CiResult ratio_ci(const RatioAccumulator& acc, double level = 0.95) {
  if (acc.n < 30)
    fail(ErrorCode::TooFewSamples, "ratio_ci needs n >= 30, got " + std::to_string(acc.n));
  if (!(acc.sum_b > 0.0)) fail(ErrorCode::DegenerateVariance, "ratio_ci: denominator sum <= 0");
  const double n = static_cast<double>(acc.n);
  const double mean_a = acc.sum_a / n;
  const double mean_b = acc.sum_b / n;
  const double theta = acc.sum_a / acc.sum_b;
  const double var_a = std::max(0.0, (acc.sum_a2 - n * mean_a * mean_a) / (n - 1.0));
  const double var_b = std::max(0.0, (acc.sum_b2 - n * mean_b * mean_b) / (n - 1.0));
  const double cov_ab = (acc.sum_ab - n * mean_a * mean_b) / (n - 1.0);
  const double var_theta =
      std::max(0.0, var_a - 2.0 * theta * cov_ab + theta * theta * var_b) / (n * mean_b * mean_b);
  const double z = special::normal_quantile(0.5 * (1.0 + level));
  return {theta, z * std::sqrt(var_theta)};
}

/// Standard error of the ratio estimate (half-width at z = 1).
inline double ratio_se(const RatioAccumulator& acc) {
  CiResult ci = ratio_ci(acc, 0.682689492137085897);  // one-sigma level
  return ci.half_width;
}

/// Survival function of the asymptotic Kolmogorov distribution at lambda.
/// Series truncated when terms drop below 1e-10; the dual theta series is
/// used for small lambda where the alternating series converges slowly.
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 1e-8) return 1.0;
  if (lambda < 0.4) {
    const double c = M_PI * M_PI / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 64; ++k) {
      const double term = std::exp(-c * (2.0 * k - 1.0) * (2.0 * k - 1.0));
      cdf += term;
      if (term < 1e-10) break;
    }
    cdf *= std::sqrt(2.0 * M_PI) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sf += sign * term;
    sign = -sign;
    if (term < 1e-10) break;
  }
  return std::clamp(2.0 * sf, 0.0, 1.0);
}

struct KsResult {
  double d = 0.0;
  double p = 0.0;
};

/// One-sample Kolmogorov-Smirnov test against the standard normal CDF.
/// The caller standardizes the samples.
inline KsResult ks_normal_test(std::span<const double> samples) {
  if (samples.size() < 50)
    fail(ErrorCode::TooFewSamples,
         "ks_normal_test needs n >= 50, got " + std::to_string(samples.size()));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = special::normal_cdf(sorted[i]);
    const double lo = cdf - static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n - cdf;
    d = std::max({d, lo, hi});
  }
  return {d, kolmogorov_sf(std::sqrt(n) * d)};
}

template <typename T>
struct Series {
  std::size_t n;
  T value;
};

/// Law-of-the-iterated-logarithm track L_n = (S_n - n mu) / sqrt(2 n sigma2 lnln n)
/// for entries with n >= 16 (where lnln n > 0).
inline std::vector<Series<double>> lil_track(
    std::span<const std::pair<std::size_t, double>> partial_sums, double mu, double sigma2) {
  if (!(sigma2 > 0.0)) fail(ErrorCode::DegenerateVariance, "lil_track needs sigma2 > 0");
  std::vector<Series<double>> out;
  out.reserve(partial_sums.size());
  for (const auto& [n, s_n] : partial_sums) {
    if (n < 16) continue;
    const double nn = static_cast<double>(n);
    const double denom = std::sqrt(2.0 * nn * sigma2 * std::log(std::log(nn)));
    out.push_back({n, (s_n - nn * mu) / denom});
  }
  return out;
}

/// Value of L_n for a single (n, S_n) point.
inline double lil_value(std::size_t n, double s_n, double mu, double sigma2) {
  const double nn = static_cast<double>(n);
  return (s_n - nn * mu) / std::sqrt(2.0 * nn * sigma2 * std::log(std::log(nn)));
}

/// Truncated second-moment statistic of the Lindeberg condition,
/// (1/n) sum_{k<n} d_k^2 1{|d_k| >= eps sqrt(n)}, evaluated on the doubling
/// schedule n = 1, 2, 4, ... plus the full length. The indicator is
/// inclusive at the threshold.
inline std::vector<Series<double>> lindeberg_statistic(std::span<const double> increments,
                                                       double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::ConfigInvalid, "lindeberg_statistic needs eps > 0");
  std::vector<std::size_t> schedule;
  for (std::size_t n = 1; n <= increments.size(); n *= 2) schedule.push_back(n);
  if (!increments.empty() && (schedule.empty() || schedule.back() != increments.size()))
    schedule.push_back(increments.size());
  std::vector<Series<double>> out;
  out.reserve(schedule.size());
  for (std::size_t n : schedule) {
    const double cut = eps * std::sqrt(static_cast<double>(n));
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = increments[k];
      if (std::abs(d) >= cut) sum += d * d;
    }
    out.push_back({n, sum / static_cast<double>(n)});
  }
  return out;
}

}  // namespace induct::stats
