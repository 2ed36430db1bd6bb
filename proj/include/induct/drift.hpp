#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "induct/error.hpp"
#include "induct/excursion_mc.hpp"
#include "induct/finite_chain.hpp"
#include "induct/lindley.hpp"
#include "induct/piecewise_linear.hpp"
#include "induct/quadrature.hpp"

namespace induct::drift {

/// Candidate drift function: u_s(x) = 1 + x^s on the half line, or a table
/// of values >= 1 on a finite state set.
class DriftFunctionSpec {
 public:
  static DriftFunctionSpec power(double s) {
    if (!(s >= 0.0)) fail(ErrorCode::ConfigInvalid, "power drift function needs s >= 0");
    DriftFunctionSpec u;
    u.s_ = s;
    return u;
  }

  static DriftFunctionSpec tabulated(std::vector<double> values) {
    for (double v : values)
      if (!(v >= 1.0)) fail(ErrorCode::ConfigInvalid, "tabulated drift values must be >= 1");
    DriftFunctionSpec u;
    u.values_ = std::move(values);
    return u;
  }

  bool is_power() const { return values_.empty(); }
  double exponent() const { return s_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double x) const {
    if (!values_.empty()) {
      const auto i = static_cast<std::size_t>(std::llround(x));
      if (i >= values_.size())
        fail(ErrorCode::DimensionMismatch, "tabulated drift function evaluated off the state set");
      return values_[i];
    }
    return 1.0 + std::pow(x, s_);
  }

 private:
  double s_ = 1.0;
  std::vector<double> values_;
};

/// Norm of F^p_u: sup over the grid of |f(x)| / u(x)^(1/p).
inline double f_norm(std::span<const double> f_values, std::span<const double> u_values,
                     double p) {
  if (f_values.empty()) fail(ErrorCode::EmptyGrid, "f_norm on an empty grid");
  if (f_values.size() != u_values.size())
    fail(ErrorCode::DimensionMismatch, "f_norm: f and u grids differ");
  if (!(p >= 1.0)) fail(ErrorCode::ConfigInvalid, "f_norm needs p >= 1");
  double best = 0.0;
  for (std::size_t i = 0; i < f_values.size(); ++i) {
    if (!(u_values[i] >= 1.0)) fail(ErrorCode::ConfigInvalid, "f_norm: u must be >= 1 on the grid");
    best = std::max(best, std::abs(f_values[i]) / std::pow(u_values[i], 1.0 / p));
  }
  return best;
}

template <typename F>
double f_norm(F&& f, const DriftFunctionSpec& u, double p, std::span<const double> grid) {
  if (grid.empty()) fail(ErrorCode::EmptyGrid, "f_norm on an empty grid");
  std::vector<double> fv(grid.size()), uv(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    fv[i] = f(grid[i]);
    uv[i] = u(grid[i]);
  }
  return f_norm(fv, uv, p);
}

/// Boundedness report for the drift-function conditions, evaluated on a grid.
/// The sups are grid sups: the checked domain is part of the report.
struct DriftReport {
  double b_u = 0.0;               // sup_grid(Pu - u) + 1
  double inf_w = 0.0;             // min of w = u - Pu + B_u (>= 1 by construction)
  double sup_ratio_pw_w = 0.0;    // sup P(w) / w
  double sup_qu = 0.0;            // sup Qu (CI upper bound when Monte Carlo)
  double sup_etau_over_u = 0.0;   // sup E_x tau / u(x) (CI upper bound when Monte Carlo)
  bool pass = false;
  bool sup_at_right_edge = false; // sup(Pu - u) attained at the right grid edge
  double lambda = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> grid;
  std::vector<double> u_values;
  std::vector<double> pu_values;
  std::vector<double> w_values;

  // Monte Carlo diagnostics (half-line variant only).
  std::vector<double> mc_points, etau_hat, etau_se, qu_hat, qu_se;
};

/// Exact drift report on a finite chain: Pu, Qu and E.tau all come from the
/// dense engine.
inline DriftReport drift_report(const finite_chain::StochasticMatrix& p,
                                const finite_chain::ReturnSet& y,
                                std::span<const double> u_values) {
  const auto n = p.size();
  if (static_cast<Eigen::Index>(u_values.size()) != n)
    fail(ErrorCode::DimensionMismatch, "drift function table does not match chain size");
  for (double v : u_values)
    if (!(v >= 1.0)) fail(ErrorCode::ConfigInvalid, "drift function must be >= 1");

  Eigen::VectorXd u(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] = u_values[static_cast<std::size_t>(i)];
  const Eigen::VectorXd pu = p.matrix() * u;
  const finite_chain::InducedSystem sys = finite_chain::induced_operators(p, y);
  const Eigen::VectorXd qu = sys.q * u;

  DriftReport rep;
  rep.b_u = (pu - u).maxCoeff() + 1.0;
  const Eigen::VectorXd w = u - pu + Eigen::VectorXd::Constant(n, rep.b_u);
  const Eigen::VectorXd pw = p.matrix() * w;
  rep.inf_w = w.minCoeff();
  rep.sup_ratio_pw_w = (pw.array() / w.array()).maxCoeff();
  rep.sup_qu = qu.maxCoeff();
  rep.sup_etau_over_u = (sys.mean_return.array() / u.array()).maxCoeff();
  rep.grid.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rep.grid[static_cast<std::size_t>(i)] = static_cast<double>(i);
  rep.u_values.assign(u.data(), u.data() + n);
  rep.pu_values.assign(pu.data(), pu.data() + n);
  rep.w_values.assign(w.data(), w.data() + n);
  rep.pass = rep.inf_w >= 1.0 - 1e-9 && std::isfinite(rep.sup_ratio_pw_w) &&
             std::isfinite(rep.sup_qu) && std::isfinite(rep.sup_etau_over_u);
  return rep;
}

struct DriftMcParams {
  std::size_t n_excursions = 2000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::size_t grid_stride = 16;  // Monte Carlo E.tau / Qu every k-th grid point
  double ci_z = 3.0;
  std::uint64_t cap = excursion_mc::kDefaultCap;
};

/// Default verification grid: integers 0..200 for discrete laws; 512 uniform
/// points on [0, 50 sd / |lambda|] for continuous ones.
inline std::vector<double> default_grid(const lindley::StepDistribution& rho) {
  std::vector<double> grid;
  if (rho.is_discrete()) {
    grid.reserve(201);
    for (int i = 0; i <= 200; ++i) grid.push_back(static_cast<double>(i));
    return grid;
  }
  const double lambda = lindley::drift_lambda(rho);
  const double x_max = 50.0 * rho.sd() / std::max(std::abs(lambda), 1e-6);
  grid.reserve(512);
  for (int i = 0; i < 512; ++i) grid.push_back(x_max * i / 511.0);
  return grid;
}

/// Drift report for the reflected walk. Pu comes from exact sums or
/// quadrature; Qu and E.tau come from excursion sampling, with CI upper
/// bounds feeding the sups. A positive-drift law is reported as failing
/// (sup(Pu - u) attained at the right grid edge), not as an error.
inline DriftReport drift_report(const lindley::StepDistribution& rho, const DriftFunctionSpec& u,
                                std::span<const double> grid,
                                const quadrature::QuadratureSpec& quad = {},
                                const DriftMcParams& mc = {}) {
  if (grid.size() < 2) fail(ErrorCode::EmptyGrid, "drift_report needs a grid of >= 2 points");
  if (!u.is_power())
    fail(ErrorCode::ConfigInvalid, "half-line drift reports use the power family u_s");

  DriftReport rep;
  rep.lambda = lindley::drift_lambda(rho);
  rep.grid.assign(grid.begin(), grid.end());
  rep.u_values.resize(grid.size());
  rep.pu_values.resize(grid.size());
  auto u_fn = [&u](double t) { return u(t); };
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rep.u_values[i] = u(grid[i]);
    rep.pu_values[i] = lindley::kernel_apply(rho, u_fn, grid[i], quad);
  }

  std::size_t argmax = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (rep.pu_values[i] - rep.u_values[i] >
        rep.pu_values[argmax] - rep.u_values[argmax])
      argmax = i;
  rep.b_u = rep.pu_values[argmax] - rep.u_values[argmax] + 1.0;
  rep.sup_at_right_edge = (argmax + 1 == grid.size());

  rep.w_values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    rep.w_values[i] = rep.u_values[i] - rep.pu_values[i] + rep.b_u;
  rep.inf_w = *std::min_element(rep.w_values.begin(), rep.w_values.end());

  // P(w)/w. For continuous laws Pu is interpolated from a refined grid so
  // the nested integral stays cheap.
  const double reach = std::max(0.0, rho.support(quad.tail_eps).second);
  if (rho.is_discrete()) {
    auto pu_exact = [&](double t) { return lindley::kernel_apply(rho, u_fn, t, quad); };
    auto w_fn = [&](double t) { return u(t) - pu_exact(t) + rep.b_u; };
    double sup = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      sup = std::max(sup, lindley::kernel_apply(rho, w_fn, grid[i], quad) / rep.w_values[i]);
    rep.sup_ratio_pw_w = sup;
  } else {
    const double hi = grid.back() + reach;
    const std::size_t fine_n = 4 * grid.size();
    std::vector<double> fine_x(fine_n), fine_pu(fine_n);
    for (std::size_t i = 0; i < fine_n; ++i) {
      fine_x[i] = hi * static_cast<double>(i) / static_cast<double>(fine_n - 1);
      fine_pu[i] = lindley::kernel_apply(rho, u_fn, fine_x[i], quad);
    }
    const interp::PiecewiseLinear pu_interp(fine_x, fine_pu);
    auto w_fn = [&](double t) { return u(t) - pu_interp(t) + rep.b_u; };
    double sup = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      sup = std::max(sup, lindley::kernel_apply(rho, w_fn, grid[i], quad) / rep.w_values[i]);
    rep.sup_ratio_pw_w = sup;
  }

  if (rep.lambda < 0.0) {
    const std::size_t stride = std::max<std::size_t>(mc.grid_stride, 1);
    double sup_qu = 0.0, sup_etau = 0.0;
    for (std::size_t i = 0; i < grid.size(); i += stride) {
      const double x = grid[i];
      struct Acc {
        std::size_t n = 0;
        double tau = 0.0, tau2 = 0.0, qu = 0.0, qu2 = 0.0;
        void merge(const Acc& o) { n += o.n; tau += o.tau; tau2 += o.tau2; qu += o.qu; qu2 += o.qu2; }
      };
      const std::array<std::function<double(double)>, 0> no_f{};
      Acc acc = excursion_mc::detail::run_workers(
          mc.n_excursions, mc.workers, Acc{},
          [&](unsigned worker, std::size_t begin, std::size_t end, Acc& a) {
            rng::Stream stream = rng::Stream::from(mc.seed, excursion_mc::lane::kDrift,
                                                   (i << 16) + worker);
            for (std::size_t k = begin; k < end; ++k) {
              const auto rec =
                  excursion_mc::sample_excursion_stream(rho, x, no_f, stream, mc.cap);
              const double tau = static_cast<double>(rec.tau);
              const double quv = u(0.0);  // X_tau = 0 exactly
              ++a.n;
              a.tau += tau;
              a.tau2 += tau * tau;
              a.qu += quv;
              a.qu2 += quv * quv;
            }
          });
      const double n = static_cast<double>(acc.n);
      const double etau_mean = acc.tau / n;
      const double etau_se =
          std::sqrt(std::max(0.0, (acc.tau2 - n * etau_mean * etau_mean) / (n - 1.0)) / n);
      const double qu_mean = acc.qu / n;
      const double qu_se =
          std::sqrt(std::max(0.0, (acc.qu2 - n * qu_mean * qu_mean) / (n - 1.0)) / n);
      rep.mc_points.push_back(x);
      rep.etau_hat.push_back(etau_mean);
      rep.etau_se.push_back(etau_se);
      rep.qu_hat.push_back(qu_mean);
      rep.qu_se.push_back(qu_se);
      sup_qu = std::max(sup_qu, qu_mean + mc.ci_z * qu_se);
      sup_etau = std::max(sup_etau, (etau_mean + mc.ci_z * etau_se) / u(x));
    }
    rep.sup_qu = sup_qu;
    rep.sup_etau_over_u = sup_etau;
  } else {
    rep.sup_qu = std::numeric_limits<double>::infinity();
    rep.sup_etau_over_u = std::numeric_limits<double>::infinity();
  }

  rep.pass = rep.lambda < 0.0 && !rep.sup_at_right_edge && rep.inf_w >= 1.0 - 1e-9 &&
             std::isfinite(rep.sup_ratio_pw_w) && std::isfinite(rep.sup_qu) &&
             std::isfinite(rep.sup_etau_over_u);
  return rep;
}

/// Constants of the sandwich u_{s-1}/N_s <= u_s - Pu_s + B_s <= N_s u_{s-1}
/// over the grid; N_s is the smallest constant valid at every grid point.
struct SandwichConstants {
  double b_s = 0.0;
  double n_s = 0.0;
  std::vector<double> grid;
  std::vector<double> u_values;   // u_s
  std::vector<double> pu_values;  // P u_s
  std::vector<double> w_values;   // u_s - P u_s + B_s
};

inline SandwichConstants sandwich_constants(const lindley::StepDistribution& rho, double s,
                                            std::span<const double> grid,
                                            const quadrature::QuadratureSpec& quad = {}) {
  if (!(s >= 1.0)) fail(ErrorCode::ConfigInvalid, "sandwich_constants needs s >= 1");
  if (rho.moment_order() < s)
    fail(ErrorCode::MomentTooLow, "declared moment order " + std::to_string(rho.moment_order()) +
         " < s = " + std::to_string(s));
  lindley::require_negative_drift(rho);
  if (grid.size() < 2) fail(ErrorCode::EmptyGrid, "sandwich_constants needs a grid of >= 2 points");

  const DriftFunctionSpec us = DriftFunctionSpec::power(s);
  const DriftFunctionSpec usm1 = DriftFunctionSpec::power(s - 1.0);
  SandwichConstants out;
  out.grid.assign(grid.begin(), grid.end());
  out.u_values.resize(grid.size());
  out.pu_values.resize(grid.size());
  auto u_fn = [&us](double t) { return us(t); };
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.u_values[i] = us(grid[i]);
    out.pu_values[i] = lindley::kernel_apply(rho, u_fn, grid[i], quad);
  }
  double b = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i)
    b = std::max(b, out.pu_values[i] - out.u_values[i]);
  out.b_s = b + 1.0;
  out.w_values.resize(grid.size());
  double n_s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.w_values[i] = out.u_values[i] - out.pu_values[i] + out.b_s;
    const double lower = usm1(grid[i]);
    n_s = std::max({n_s, out.w_values[i] / lower, lower / out.w_values[i]});
  }
  out.n_s = n_s;
  return out;
}

}  // namespace induct::drift
