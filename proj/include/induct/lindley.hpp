#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "induct/error.hpp"
#include "induct/finite_chain.hpp"
#include "induct/quadrature.hpp"
#include "induct/rng.hpp"
#include "induct/special.hpp"

namespace induct::lindley {

/// One-step increment law rho for the walk X_{n+1} = max(X_n + Y_{n+1}, 0).
class StepDistribution {
 public:
  struct Atom {
    double y;
    double p;
  };
  struct MixtureLaw {
    std::vector<Atom> atoms;
  };
  struct NormalLaw {
    double mean;
    double sd;
  };
  struct UniformLaw {
    double a;
    double b;
  };

  static StepDistribution mixture(std::vector<Atom> atoms,
                                  double moment_order = std::numeric_limits<double>::infinity()) {
    if (atoms.empty()) fail(ErrorCode::ConfigInvalid, "mixture needs at least one atom");
    double total = 0.0;
    for (const auto& a : atoms) {
      if (a.p < 0.0) fail(ErrorCode::ConfigInvalid, "mixture probability < 0");
      total += a.p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      fail(ErrorCode::ConfigInvalid, "mixture probabilities sum to " + std::to_string(total));
    for (auto& a : atoms) a.p /= total;
    return StepDistribution(MixtureLaw{std::move(atoms)}, moment_order);
  }

  static StepDistribution normal(double mean, double sd,
                                 double moment_order = std::numeric_limits<double>::infinity()) {
    if (!(sd > 0.0)) fail(ErrorCode::ConfigInvalid, "normal law needs sd > 0");
    return StepDistribution(NormalLaw{mean, sd}, moment_order);
  }

  static StepDistribution uniform(double a, double b,
                                  double moment_order = std::numeric_limits<double>::infinity()) {
    if (!(b > a)) fail(ErrorCode::ConfigInvalid, "uniform law needs b > a");
    return StepDistribution(UniformLaw{a, b}, moment_order);
  }

  bool is_discrete() const { return std::holds_alternative<MixtureLaw>(law_); }
  const std::vector<Atom>& atoms() const { return std::get<MixtureLaw>(law_).atoms; }
  double moment_order() const { return moment_order_; }

  /// Exact first moment (the drift lambda).
  double mean() const {
    if (const auto* m = std::get_if<MixtureLaw>(&law_)) {
      double s = 0.0;
      for (const auto& a : m->atoms) s += a.p * a.y;
      return s;
    }
    if (const auto* n = std::get_if<NormalLaw>(&law_)) return n->mean;
    const auto& u = std::get<UniformLaw>(law_);
    return 0.5 * (u.a + u.b);
  }

  double second_moment() const {
    if (const auto* m = std::get_if<MixtureLaw>(&law_)) {
      double s = 0.0;
      for (const auto& a : m->atoms) s += a.p * a.y * a.y;
      return s;
    }
    if (const auto* n = std::get_if<NormalLaw>(&law_)) return n->mean * n->mean + n->sd * n->sd;
    const auto& u = std::get<UniformLaw>(law_);
    return (u.a * u.a + u.a * u.b + u.b * u.b) / 3.0;
  }

  double sd() const {
    const double v = second_moment() - mean() * mean();
    return std::sqrt(std::max(v, 0.0));
  }

  /// rho((-inf, t]).
  double cdf(double t) const {
    if (const auto* m = std::get_if<MixtureLaw>(&law_)) {
      double s = 0.0;
      for (const auto& a : m->atoms)
        if (a.y <= t) s += a.p;
      return s;
    }
    if (const auto* n = std::get_if<NormalLaw>(&law_))
      return special::normal_cdf((t - n->mean) / n->sd);
    const auto& u = std::get<UniformLaw>(law_);
    return std::clamp((t - u.a) / (u.b - u.a), 0.0, 1.0);
  }

  /// Smallest interval [lo, hi] holding all mass but <= tail_eps (exact
  /// support for mixture/uniform; normal quantiles otherwise).
  std::pair<double, double> support(double tail_eps) const {
    if (const auto* m = std::get_if<MixtureLaw>(&law_)) {
      double lo = m->atoms.front().y, hi = lo;
      for (const auto& a : m->atoms) {
        lo = std::min(lo, a.y);
        hi = std::max(hi, a.y);
      }
      return {lo, hi};
    }
    if (const auto* n = std::get_if<NormalLaw>(&law_)) {
      const double z = -special::normal_quantile(0.5 * tail_eps);
      return {n->mean - z * n->sd, n->mean + z * n->sd};
    }
    const auto& u = std::get<UniformLaw>(law_);
    return {u.a, u.b};
  }

  double density(double y) const {
    if (const auto* n = std::get_if<NormalLaw>(&law_))
      return special::normal_pdf((y - n->mean) / n->sd) / n->sd;
    if (const auto* u = std::get_if<UniformLaw>(&law_))
      return (y >= u->a && y <= u->b) ? 1.0 / (u->b - u->a) : 0.0;
    fail(ErrorCode::Internal, "density() on a discrete mixture");
  }

  double sample(rng::Stream& stream) const {
    if (const auto* m = std::get_if<MixtureLaw>(&law_)) {
      const double u = stream.next_unit();
      double cum = 0.0;
      for (const auto& a : m->atoms) {
        cum += a.p;
        if (u <= cum) return a.y;
      }
      return m->atoms.back().y;
    }
    if (const auto* n = std::get_if<NormalLaw>(&law_))
      return n->mean + n->sd * stream.next_normal();
    const auto& u = std::get<UniformLaw>(law_);
    return u.a + (u.b - u.a) * stream.next_unit();
  }

 private:
  StepDistribution(std::variant<MixtureLaw, NormalLaw, UniformLaw> law, double order)
      : law_(std::move(law)), moment_order_(order) {}

  std::variant<MixtureLaw, NormalLaw, UniformLaw> law_;
  double moment_order_;
};

/// Exact drift lambda = integral of y drho(y).
inline double drift_lambda(const StepDistribution& rho) { return rho.mean(); }

inline void require_negative_drift(const StepDistribution& rho) {
  if (!(drift_lambda(rho) < 0.0))
    fail(ErrorCode::NonNegativeDrift,
         "drift lambda = " + std::to_string(drift_lambda(rho)) + " is not negative");
}

/// One reflected step.
inline double step(double x, double y) { return std::max(x + y, 0.0); }

/// Applies the walk kernel: Pf(x) = f(0) rho((-inf,-x]) + int_{-x}^inf f(x+y) drho.
/// Exact atom sum for discrete mixtures; composite Gauss-Legendre otherwise.
/// `breaks` lists integrand kinks in the state coordinate t = x + y.
template <typename F>
double kernel_apply(const StepDistribution& rho, F&& f, double x,
                    const quadrature::QuadratureSpec& quad = {},
                    std::span<const double> breaks = {}) {
  if (x < 0.0) fail(ErrorCode::Internal, "kernel_apply: x must be >= 0");
  if (rho.is_discrete()) {
    double sum = 0.0;
    for (const auto& a : rho.atoms()) sum += a.p * f(step(x, a.y));
    return sum;
  }
  const auto [y_lo, y_hi] = rho.support(quad.tail_eps);
  double value = rho.cdf(-x) * f(0.0);
  const double t_lo = std::max(0.0, x + y_lo);
  const double t_hi = x + y_hi;
  if (t_hi > t_lo) {
    const double width = std::max(rho.sd() * quad.panel_width_scale, 1e-6 * (t_hi - t_lo));
    const auto edges = quadrature::make_panel_edges(t_lo, t_hi, width, breaks);
    value += quadrature::composite(
        [&](double t) { return f(t) * rho.density(t - x); }, edges, quad.nodes_per_panel);
  }
  if (!std::isfinite(value)) fail(ErrorCode::QuadratureFailure, "kernel_apply produced non-finite value");
  return value;
}

/// Coefficients c_j with P g(x) ~= sum_j c_j g(knot_j) for the
/// piecewise-linear interpolant of g on `knots` (linear extension outside).
inline std::vector<double> kernel_weights(const StepDistribution& rho,
                                          std::span<const double> knots, double x,
                                          const quadrature::QuadratureSpec& quad = {}) {
  if (knots.size() < 2) fail(ErrorCode::DimensionMismatch, "kernel_weights: need >= 2 knots");
  std::vector<double> coeff(knots.size(), 0.0);
  auto deposit = [&](double t, double c) {
    std::size_t hi = std::upper_bound(knots.begin(), knots.end(), t) - knots.begin();
    if (hi == 0) hi = 1;
    if (hi == knots.size()) hi = knots.size() - 1;
    const std::size_t lo = hi - 1;
    const double w_hi = (t - knots[lo]) / (knots[hi] - knots[lo]);
    coeff[lo] += c * (1.0 - w_hi);
    coeff[hi] += c * w_hi;
  };
  if (rho.is_discrete()) {
    for (const auto& a : rho.atoms()) deposit(step(x, a.y), a.p);
    return coeff;
  }
  const auto [y_lo, y_hi] = rho.support(quad.tail_eps);
  deposit(0.0, rho.cdf(-x));
  const double t_lo = std::max(0.0, x + y_lo);
  const double t_hi = x + y_hi;
  if (t_hi > t_lo) {
    const double width = std::max(rho.sd() * quad.panel_width_scale, 1e-6 * (t_hi - t_lo));
    const auto edges = quadrature::make_panel_edges(t_lo, t_hi, width, knots);
    const auto& [gx, gw] = quadrature::gauss_legendre(quad.nodes_per_panel);
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
      const double mid = 0.5 * (edges[e] + edges[e + 1]);
      const double half = 0.5 * (edges[e + 1] - edges[e]);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const double t = mid + half * gx[i];
        deposit(t, half * gw[i] * rho.density(t - x));
      }
    }
  }
  return coeff;
}

/// Sampled walk positions X_0..X_n with the seed that produced them.
struct Trajectory {
  std::vector<double> states;
  std::uint64_t seed = 0;
};

inline Trajectory sample_path(const StepDistribution& rho, double x0, std::size_t n_steps,
                              std::uint64_t seed) {
  if (x0 < 0.0) fail(ErrorCode::ConfigInvalid, "sample_path: x0 must be >= 0");
  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(n_steps + 1);
  traj.states.push_back(x0);
  rng::Stream stream = rng::Stream::from(seed, /*lane_a=*/0x70617468u);  // "path"
  double x = x0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    x = step(x, rho.sample(stream));
    traj.states.push_back(x);
  }
  return traj;
}

/// Exact truncation of the walk to states {0..x_max} for integer-atom
/// mixtures; mass that would exceed x_max is lumped into x_max. Returns the
/// matrix and a stationary-tail bound quantifying the truncation bias.
inline std::pair<finite_chain::StochasticMatrix, double> discretize(const StepDistribution& rho,
                                                                    int x_max) {
  if (!rho.is_discrete()) fail(ErrorCode::NonIntegerAtoms, "discretize needs a discrete mixture");
  if (x_max < 1) fail(ErrorCode::ConfigInvalid, "discretize: x_max must be >= 1");
  std::vector<long long> atom_y;
  for (const auto& a : rho.atoms()) {
    const double r = std::round(a.y);
    if (std::abs(a.y - r) > 1e-9)
      fail(ErrorCode::NonIntegerAtoms, "atom " + std::to_string(a.y) + " is not an integer");
    atom_y.push_back(static_cast<long long>(r));
  }
  const int n = x_max + 1;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x <= x_max; ++x) {
    for (std::size_t i = 0; i < atom_y.size(); ++i) {
      long long t = std::max<long long>(x + atom_y[i], 0);
      t = std::min<long long>(t, x_max);
      p(x, static_cast<int>(t)) += rho.atoms()[i].p;
    }
  }

  double tail_bound = 1.0;
  const double lambda = drift_lambda(rho);
  if (lambda < 0.0) {
    if (atom_y.size() == 2 &&
        ((atom_y[0] == 1 && atom_y[1] == -1) || (atom_y[0] == -1 && atom_y[1] == 1))) {
      const double p_up = atom_y[0] == 1 ? rho.atoms()[0].p : rho.atoms()[1].p;
      tail_bound = std::pow(p_up / (1.0 - p_up), x_max);
    } else {
      // Markov inequality on u_1 with the stationary-mean bound E X <= E Y^2 / (2|lambda|).
      tail_bound = std::min(1.0, rho.second_moment() / (2.0 * -lambda * x_max));
    }
  }
  return {finite_chain::StochasticMatrix::validate(p), tail_bound};
}

}  // namespace induct::lindley
