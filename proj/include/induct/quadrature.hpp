#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "induct/error.hpp"

namespace induct::quadrature {

/// Controls the numeric evaluation of integrals against continuous step laws.
struct QuadratureSpec {
  int nodes_per_panel = 24;
  /// Probability mass allowed outside the finite integration window.
  double tail_eps = 1e-13;
  /// Upper bound on panel width, in units of the law's scale (sd or span).
  double panel_width_scale = 1.0;
};

/// Gauss-Legendre nodes/weights on [-1, 1], computed by Newton iteration
/// and cached per order.
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  std::vector<double> x(n), w(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
  return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

/// Integrates f over [a, b] with a single Gauss-Legendre panel.
template <typename F>
double panel(F&& f, double a, double b, int nodes) {
  const auto& [x, w] = gauss_legendre(nodes);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * f(mid + half * x[i]);
  return sum * half;
}

/// Builds sorted panel edges covering [a, b]: a uniform subdivision at the
/// requested width, refined by any interior breakpoints (integrand kinks).
inline std::vector<double> make_panel_edges(double a, double b, double max_width,
                                            std::span<const double> breaks = {}) {
  if (!(b > a)) return {a, b};
  std::vector<double> edges;
  const int k = std::max(1, static_cast<int>(std::ceil((b - a) / max_width)));
  edges.reserve(static_cast<std::size_t>(k) + breaks.size() + 1);
  for (int i = 0; i <= k; ++i) edges.push_back(a + (b - a) * i / k);
  for (double t : breaks)
    if (t > a && t < b) edges.push_back(t);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [&](double u, double v) { return v - u < 1e-14 * (1.0 + std::abs(u)); }),
              edges.end());
  return edges;
}

/// Composite Gauss-Legendre integral over the given panel edges.
template <typename F>
double composite(F&& f, std::span<const double> edges, int nodes) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    sum += panel(f, edges[i], edges[i + 1], nodes);
  if (!std::isfinite(sum))
    fail(ErrorCode::QuadratureFailure, "non-finite integral value");
  return sum;
}

}  // namespace induct::quadrature
