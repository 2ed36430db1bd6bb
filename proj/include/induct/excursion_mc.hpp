#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "induct/error.hpp"
#include "induct/lindley.hpp"
#include "induct/piecewise_linear.hpp"
#include "induct/quadrature.hpp"
#include "induct/rng.hpp"
#include "induct/stats.hpp"

namespace induct::excursion_mc {

using lindley::StepDistribution;

inline constexpr std::uint64_t kDefaultCap = 1'000'000'000ull;

// Stream lanes, so that estimators drawing from the same seed stay independent.
namespace lane {
inline constexpr std::uint64_t kKac = 1;
// r_estimate and phi_moment share a lane: with the same (x, n, seed, workers)
// they see the same excursions, so R1(x) and E_x tau agree exactly.
inline constexpr std::uint64_t kREstimate = 2;
inline constexpr std::uint64_t kPoissonGrid = 4;
inline constexpr std::uint64_t kSigma2 = 5;
inline constexpr std::uint64_t kClt = 6;
inline constexpr std::uint64_t kDrift = 7;
}  // namespace lane

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// One excursion: the walk from x0 until the first n >= 1 with
/// X_{n-1} + Y_n <= 0 (so X_tau = 0 exactly), with per-function sums
/// f(X_0) + ... + f(X_{tau-1}).
struct ExcursionRecord {
  std::uint64_t tau = 0;
  std::vector<double> f_sums;
  double x_final = 0.0;  // X_tau; equals 0 whenever the tau detector is correct
};

template <typename FList>
ExcursionRecord sample_excursion_stream(const StepDistribution& rho, double x0,
                                        const FList& f_list, rng::Stream& stream,
                                        std::uint64_t cap = kDefaultCap) {
  ExcursionRecord rec;
  rec.f_sums.assign(f_list.size(), 0.0);
  double x = x0;
  for (;;) {
    for (std::size_t i = 0; i < f_list.size(); ++i) rec.f_sums[i] += f_list[i](x);
    ++rec.tau;
    if (rec.tau > cap)
      fail(ErrorCode::ExcursionCapExceeded,
           "excursion from x0=" + std::to_string(x0) + " exceeded " + std::to_string(cap) +
           " steps; check the declared drift");
    const double y = rho.sample(stream);
    if (x + y <= 0.0) {
      rec.x_final = std::max(x + y, 0.0);
      break;
    }
    x += y;
  }
  return rec;
}

inline ExcursionRecord sample_excursion(const StepDistribution& rho, double x0,
                                        std::span<const std::function<double(double)>> f_list,
                                        std::uint64_t seed, std::uint64_t cap = kDefaultCap) {
  lindley::require_negative_drift(rho);
  rng::Stream stream = rng::Stream::from(seed, lane::kREstimate);
  return sample_excursion_stream(rho, x0, f_list, stream, cap);
}

/// Accumulated excursion statistics for the Kac ratio estimator.
struct ExcursionBatch {
  std::size_t count = 0;
  double tau_sum = 0.0;
  double tau_sq_sum = 0.0;
  std::vector<double> f_sums;     // per function: sum over excursions of Sum f
  std::vector<double> f_sq_sums;  // per function: sum of (Sum f)^2
  std::vector<double> f_cross;    // per function: sum of (Sum f) * tau
  double start_x = 0.0;
  std::uint64_t seed = 0;

  explicit ExcursionBatch(std::size_t n_functions = 0)
      : f_sums(n_functions, 0.0), f_sq_sums(n_functions, 0.0), f_cross(n_functions, 0.0) {}

  void add(const ExcursionRecord& rec) {
    ++count;
    const double tau = static_cast<double>(rec.tau);
    tau_sum += tau;
    tau_sq_sum += tau * tau;
    for (std::size_t i = 0; i < rec.f_sums.size(); ++i) {
      f_sums[i] += rec.f_sums[i];
      f_sq_sums[i] += rec.f_sums[i] * rec.f_sums[i];
      f_cross[i] += rec.f_sums[i] * tau;
    }
  }

  void merge(const ExcursionBatch& other) {
    count += other.count;
    tau_sum += other.tau_sum;
    tau_sq_sum += other.tau_sq_sum;
    for (std::size_t i = 0; i < f_sums.size(); ++i) {
      f_sums[i] += other.f_sums[i];
      f_sq_sums[i] += other.f_sq_sums[i];
      f_cross[i] += other.f_cross[i];
    }
  }

  stats::RatioAccumulator ratio_accumulator(std::size_t i) const {
    stats::RatioAccumulator acc;
    acc.n = count;
    acc.sum_a = f_sums[i];
    acc.sum_b = tau_sum;
    acc.sum_a2 = f_sq_sums[i];
    acc.sum_b2 = tau_sq_sum;
    acc.sum_ab = f_cross[i];
    return acc;
  }
};

namespace detail {

/// Runs `make(worker, begin, end)` over `workers` contiguous blocks of
/// [0, n_items) and merges the per-worker results in worker-index order, so
/// the outcome depends only on (inputs, seed, workers).
template <typename Acc, typename Fn>
Acc run_workers(std::size_t n_items, unsigned workers, Acc init, Fn&& make) {
  if (workers <= 1) {
    make(0u, std::size_t{0}, n_items, init);
    return init;
  }
  const std::size_t w = std::min<std::size_t>(workers, std::max<std::size_t>(n_items, 1));
  std::vector<Acc> parts(w, init);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  threads.reserve(w);
  for (std::size_t i = 0; i < w; ++i) {
    const std::size_t begin = n_items * i / w;
    const std::size_t end = n_items * (i + 1) / w;
    threads.emplace_back([&, i, begin, end] {
      try {
        make(static_cast<unsigned>(i), begin, end, parts[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (std::size_t i = 1; i < w; ++i) parts[0].merge(parts[i]);
  return parts[0];
}

}  // namespace detail

/// Samples a batch of excursions from `start_x` on independent worker
/// streams derived from (seed, lane, worker index).
template <typename FList>
ExcursionBatch sample_batch(const StepDistribution& rho, double start_x, const FList& f_list,
                            std::size_t n_excursions, std::uint64_t seed, unsigned workers,
                            std::uint64_t stream_lane, std::uint64_t cap = kDefaultCap) {
  lindley::require_negative_drift(rho);
  ExcursionBatch init(f_list.size());
  init.start_x = start_x;
  init.seed = seed;
  return detail::run_workers(
      n_excursions, workers, init,
      [&](unsigned worker, std::size_t begin, std::size_t end, ExcursionBatch& acc) {
        rng::Stream stream = rng::Stream::from(seed, stream_lane, worker);
        for (std::size_t k = begin; k < end; ++k)
          acc.add(sample_excursion_stream(rho, start_x, f_list, stream, cap));
      });
}

/// Kac-ratio estimator of the stationary integrals mu(f_i), from excursions
/// started at 0: mu(f) = E_0[Sum_{k<tau} f(X_k)] / E_0[tau].
template <typename FList>
std::vector<Estimate> kac_estimator(const StepDistribution& rho, const FList& f_list,
                                    std::size_t n_excursions, std::uint64_t seed,
                                    unsigned workers = 1, std::uint64_t cap = kDefaultCap,
                                    ExcursionBatch* batch_out = nullptr) {
  if (n_excursions < 100)
    fail(ErrorCode::TooFewSamples, "kac_estimator needs >= 100 excursions");
  const ExcursionBatch batch =
      sample_batch(rho, 0.0, f_list, n_excursions, seed, workers, lane::kKac, cap);
  std::vector<Estimate> out(f_list.size());
  for (std::size_t i = 0; i < f_list.size(); ++i) {
    const auto acc = batch.ratio_accumulator(i);
    out[i] = {acc.sum_a / acc.sum_b, stats::ratio_se(acc)};
  }
  if (batch_out) *batch_out = batch;
  return out;
}

/// Plain mean/SE of per-excursion sums started at x: estimates Rf(x).
template <typename F>
Estimate r_estimate(const StepDistribution& rho, F&& f, double x, std::size_t n_excursions,
                    std::uint64_t seed, unsigned workers = 1, std::uint64_t cap = kDefaultCap) {
  const std::array<std::decay_t<F>, 1> f_list{std::forward<F>(f)};
  const ExcursionBatch batch =
      sample_batch(rho, x, f_list, n_excursions, seed, workers, lane::kREstimate, cap);
  const double n = static_cast<double>(batch.count);
  const double mean = batch.f_sums[0] / n;
  const double var = std::max(0.0, (batch.f_sq_sums[0] - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

struct PhiSpec {
  enum class Kind { Linear, Quadratic, Exponential } kind = Kind::Linear;
  double a = 0.5;  // base for the exponential phi(n) = a^(1-n)

  double operator()(double tau) const {
    switch (kind) {
      case Kind::Linear: return tau;
      case Kind::Quadratic: return tau * tau;
      case Kind::Exponential: return std::pow(a, 1.0 - tau);
    }
    return tau;
  }
};

/// Sample mean of phi(tau) for excursions from x; phi in {n, n^2, a^(1-n)}.
inline Estimate phi_moment(const StepDistribution& rho, double x, const PhiSpec& phi,
                           std::size_t n_excursions, std::uint64_t seed, unsigned workers = 1,
                           std::uint64_t cap = kDefaultCap) {
  if (phi.kind == PhiSpec::Kind::Exponential && !(phi.a > 0.0 && phi.a < 1.0))
    fail(ErrorCode::ConfigInvalid, "exponential phi needs a in (0,1)");
  struct Acc {
    std::size_t n = 0;
    double sum = 0.0, sq = 0.0;
    void merge(const Acc& o) { n += o.n; sum += o.sum; sq += o.sq; }
  };
  lindley::require_negative_drift(rho);
  const std::array<std::function<double(double)>, 0> no_f{};
  Acc acc = detail::run_workers(
      n_excursions, workers, Acc{},
      [&](unsigned worker, std::size_t begin, std::size_t end, Acc& a) {
        rng::Stream stream = rng::Stream::from(seed, lane::kREstimate, worker);
        for (std::size_t k = begin; k < end; ++k) {
          const auto rec = sample_excursion_stream(rho, x, no_f, stream, cap);
          const double v = phi(static_cast<double>(rec.tau));
          ++a.n;
          a.sum += v;
          a.sq += v * v;
        }
      });
  const double n = static_cast<double>(acc.n);
  const double mean = acc.sum / n;
  const double var = std::max(0.0, (acc.sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

struct PoissonOptions {
  std::size_t n_excursions_mu = 0;  // 0 -> 10x the per-point count
  unsigned workers = 1;
  quadrature::QuadratureSpec quad{};
  std::uint64_t cap = kDefaultCap;
};

/// Monte Carlo solution g of the Poisson equation g - Pg = f - mu(f),
/// realized as g = R(f - mu(f)) on a grid, with per-point standard errors
/// and the residual g - Pg - (f - mu(f)) re-evaluated through the kernel.
struct PoissonSolution {
  std::vector<double> grid;       // requested grid
  std::vector<double> g_hat;      // R(f - mu f) estimates on the grid
  std::vector<double> se;         // standard errors of g_hat
  std::vector<double> residual;   // g - Pg - (f - mu f) per grid point
  std::vector<double> residual_se;
  std::vector<double> r1_hat;     // E_x tau estimates on the grid
  double mu_f = 0.0;
  double mu_se = 0.0;
  // Grid norm of f against u_{s-1} for the declared moment order s
  // (NaN when the declared order is infinite).
  double f_norm_vs_u = std::numeric_limits<double>::quiet_NaN();

  // Full knot set (grid plus upper halo) backing the interpolants.
  std::vector<double> knots;
  std::vector<double> knot_g;
  std::vector<double> knot_r1;  // E_x tau at every knot

  interp::PiecewiseLinear g_interp() const { return interp::PiecewiseLinear(knots, knot_g); }
  interp::PiecewiseLinear r1_interp() const { return interp::PiecewiseLinear(knots, knot_r1); }
};

template <typename F>
PoissonSolution poisson_solve(const StepDistribution& rho, F&& f, std::span<const double> grid,
                              std::size_t n_excursions_per_point, std::uint64_t seed,
                              const PoissonOptions& opts = {}) {
  if (grid.size() < 2) fail(ErrorCode::EmptyGrid, "poisson_solve needs a grid of >= 2 points");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i] < grid[i + 1]))
      fail(ErrorCode::ConfigInvalid, "poisson_solve grid must be strictly increasing");
  if (!(grid[0] >= 0.0)) fail(ErrorCode::ConfigInvalid, "poisson_solve grid must start at x >= 0");
  if (n_excursions_per_point < 30)
    fail(ErrorCode::TooFewSamples, "poisson_solve needs >= 30 excursions per grid point");
  lindley::require_negative_drift(rho);
  if (rho.moment_order() < 1.0)
    fail(ErrorCode::MomentTooLow, "Poisson solutions need a declared first moment (order >= 1)");

  // Knots = grid + halo above it, so that P g is evaluable at every grid
  // point without leaving the sampled range.
  const double reach = std::max(0.0, rho.support(opts.quad.tail_eps).second);
  const double spacing = grid[grid.size() - 1] - grid[grid.size() - 2];
  std::vector<double> knots(grid.begin(), grid.end());
  while (knots.back() < grid.back() + reach - 1e-12) knots.push_back(knots.back() + spacing);

  const std::size_t n_mu =
      opts.n_excursions_mu ? opts.n_excursions_mu : 10 * n_excursions_per_point;
  ExcursionBatch mu_batch(1);
  const std::array<std::function<double(double)>, 1> f_only{std::function<double(double)>(f)};
  kac_estimator(rho, f_only, n_mu, seed, opts.workers, opts.cap, &mu_batch);
  const auto mu_acc = mu_batch.ratio_accumulator(0);
  const double mu_f = mu_acc.sum_a / mu_acc.sum_b;
  const double mu_se = stats::ratio_se(mu_acc);
  const double mu_var = mu_se * mu_se;

  // Per-knot excursion batches on independent streams.
  struct PointStats {
    double rf = 0.0, r1 = 0.0;      // sample means of Sum f and tau
    double var_g = 0.0;             // per-point variance of (Sum f - mu tau)/m
  };
  std::vector<PointStats> pts(knots.size());
  struct Empty { void merge(const Empty&) {} };
  detail::run_workers(knots.size(), opts.workers, Empty{},
                      [&](unsigned, std::size_t begin, std::size_t end, Empty&) {
    for (std::size_t j = begin; j < end; ++j) {
      const std::array<std::function<double(double)>, 1> fl{std::function<double(double)>(f)};
      ExcursionBatch batch(1);
      rng::Stream stream = rng::Stream::from(seed, lane::kPoissonGrid, j);
      for (std::size_t k = 0; k < n_excursions_per_point; ++k)
        batch.add(sample_excursion_stream(rho, knots[j], fl, stream, opts.cap));
      const double m = static_cast<double>(batch.count);
      PointStats s;
      s.rf = batch.f_sums[0] / m;
      s.r1 = batch.tau_sum / m;
      const double var_a = (batch.f_sq_sums[0] - m * s.rf * s.rf) / (m - 1.0);
      const double var_b = (batch.tau_sq_sum - m * s.r1 * s.r1) / (m - 1.0);
      const double cov = (batch.f_cross[0] - m * s.rf * s.r1) / (m - 1.0);
      s.var_g = std::max(0.0, var_a - 2.0 * mu_f * cov + mu_f * mu_f * var_b) / m;
      pts[j] = s;
    }
  });

  PoissonSolution sol;
  sol.grid.assign(grid.begin(), grid.end());
  sol.mu_f = mu_f;
  sol.mu_se = mu_se;
  if (std::isfinite(rho.moment_order())) {
    const double s_minus_1 = rho.moment_order() - 1.0;
    double norm = 0.0;
    for (double x : grid) norm = std::max(norm, std::abs(f(x)) / (1.0 + std::pow(x, s_minus_1)));
    sol.f_norm_vs_u = norm;
  }
  sol.knots = knots;
  sol.knot_g.resize(knots.size());
  sol.knot_r1.resize(knots.size());
  std::vector<double> knot_var(knots.size());
  for (std::size_t j = 0; j < knots.size(); ++j) {
    sol.knot_g[j] = pts[j].rf - mu_f * pts[j].r1;
    sol.knot_r1[j] = pts[j].r1;
    knot_var[j] = pts[j].var_g + pts[j].r1 * pts[j].r1 * mu_var;
  }
  sol.g_hat.assign(sol.knot_g.begin(), sol.knot_g.begin() + grid.size());
  sol.se.resize(grid.size());
  sol.r1_hat.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    sol.se[j] = std::sqrt(knot_var[j]);
    sol.r1_hat[j] = pts[j].r1;
  }

  // Residual g - Pg - (f - mu f) via kernel weights on the interpolant.
  sol.residual.resize(grid.size());
  sol.residual_se.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const std::vector<double> c = lindley::kernel_weights(rho, knots, grid[j], opts.quad);
    double pg = 0.0, pr1 = 0.0, var_indep = 0.0;
    for (std::size_t k = 0; k < knots.size(); ++k) {
      pg += c[k] * sol.knot_g[k];
      pr1 += c[k] * pts[k].r1;
      const double alpha = (k == j ? 1.0 : 0.0) - c[k];
      var_indep += alpha * alpha * pts[k].var_g;
    }
    sol.residual[j] = sol.knot_g[j] - pg - (f(grid[j]) - mu_f);
    const double mu_coeff = 1.0 + pr1 - pts[j].r1;  // d residual / d mu_f
    sol.residual_se[j] = std::sqrt(var_indep + mu_coeff * mu_coeff * mu_var);
  }

  // Piecewise-linear interpolation bias check (continuous laws only): the
  // local curvature signal must stay within the local Monte Carlo noise.
  if (!rho.is_discrete() && knots.size() >= 3) {
    double scale = 0.0;
    for (double v : sol.knot_g) scale = std::max(scale, std::abs(v));
    for (std::size_t j = 1; j + 1 < knots.size(); ++j) {
      const double bias =
          std::abs(sol.knot_g[j - 1] - 2.0 * sol.knot_g[j] + sol.knot_g[j + 1]) / 8.0;
      const double noise = (std::sqrt(knot_var[j - 1]) + 2.0 * std::sqrt(knot_var[j]) +
                            std::sqrt(knot_var[j + 1])) / 8.0;
      if (bias > 5.0 * noise + 1e-6 * (1.0 + scale))
        fail(ErrorCode::GridTooCoarse,
             "interpolation bias estimate " + std::to_string(bias) + " near x = " +
             std::to_string(knots[j]) + " exceeds the Monte Carlo noise; refine the grid");
    }
  }
  return sol;
}

/// Asymptotic-variance estimator via the Poisson solution:
/// sigma^2(f) = mu( P(g^2) - (Pg)^2 ), estimated by the Kac ratio applied to
/// h(x) = P(g^2)(x) - (Pg(x))^2 with g the interpolated Poisson solution.
/// The error in mu_f tilts g by -d(mu) E.tau everywhere; the reported SE
/// carries that term via the sensitivity d sigma^2 / d mu = -2 mu(k) with
/// k(x) = P(g r1)(x) - Pg(x) Pr1(x).
inline Estimate sigma2_via_g(const StepDistribution& rho, const PoissonSolution& sol,
                             std::size_t n_excursions, std::uint64_t seed,
                             unsigned workers = 1,
                             const quadrature::QuadratureSpec& quad = {},
                             std::uint64_t cap = kDefaultCap) {
  const interp::PiecewiseLinear g = sol.g_interp();
  const interp::PiecewiseLinear r1 = sol.r1_interp();
  const auto knots = g.knots();
  auto apply = [&, quad](auto&& fn, double x) {
    return lindley::kernel_apply(rho, fn, x, quad, knots);
  };
  auto h_raw = [&](double x) {
    const double pg2 = apply([&](double t) { const double v = g(t); return v * v; }, x);
    const double pg = apply([&](double t) { return g(t); }, x);
    return std::max(0.0, pg2 - pg * pg);
  };
  auto k_raw = [&](double x) {
    const double pgr = apply([&](double t) { return g(t) * r1(t); }, x);
    const double pg = apply([&](double t) { return g(t); }, x);
    const double pr1 = apply([&](double t) { return r1(t); }, x);
    return pgr - pg * pr1;
  };

  // Integer-atom mixtures visit integer states only; memoize there.
  const bool integer_states = [&] {
    if (!rho.is_discrete()) return false;
    for (const auto& a : rho.atoms())
      if (std::abs(a.y - std::round(a.y)) > 1e-9) return false;
    return true;
  }();
  std::vector<double> memo_h, memo_k;
  if (integer_states) {
    const auto size = static_cast<std::size_t>(knots.back()) + 2;
    memo_h.resize(size);
    memo_k.resize(size);
    for (std::size_t i = 0; i < size; ++i) {
      memo_h[i] = h_raw(static_cast<double>(i));
      memo_k[i] = k_raw(static_cast<double>(i));
    }
  }
  auto lookup = [integer_states](const std::vector<double>& memo, auto&& raw, double x) {
    if (integer_states) {
      const auto i = static_cast<std::size_t>(std::llround(x));
      if (i < memo.size()) return memo[i];
    }
    return raw(x);
  };
  const std::array<std::function<double(double)>, 2> fns{
      std::function<double(double)>([&](double x) { return lookup(memo_h, h_raw, x); }),
      std::function<double(double)>([&](double x) { return lookup(memo_k, k_raw, x); })};

  ExcursionBatch batch = sample_batch(rho, 0.0, fns, n_excursions, seed, workers, lane::kSigma2, cap);
  const auto acc_h = batch.ratio_accumulator(0);
  const auto acc_k = batch.ratio_accumulator(1);
  const double sigma2 = acc_h.sum_a / acc_h.sum_b;
  const double sensitivity = -2.0 * acc_k.sum_a / acc_k.sum_b;
  const double se_h = stats::ratio_se(acc_h);
  const double se = std::sqrt(se_h * se_h + sensitivity * sensitivity * sol.mu_se * sol.mu_se);
  return {sigma2, se};
}

template <typename F>
Estimate sigma2_via_g(const StepDistribution& rho, F&& f, std::span<const double> grid,
                      std::size_t n_excursions, std::uint64_t seed,
                      const PoissonOptions& opts = {}) {
  const PoissonSolution sol =
      poisson_solve(rho, std::forward<F>(f), grid, std::max<std::size_t>(n_excursions / 10, 1000),
                    seed, opts);
  return sigma2_via_g(rho, sol, n_excursions, seed, opts.workers, opts.quad, opts.cap);
}

struct CltOptions {
  double lindeberg_eps = 0.1;
  std::size_t lindeberg_cap = 1u << 20;      // increments kept for the Lindeberg statistic
  double tail_alpha = 0.5;                   // exponent diagnostic |f(X_n)| / n^(1+alpha)
  double f_class_alpha = 0.0;                // moment requirement: order > 4 + alpha
  std::size_t lil_range_lo = 100'000;        // window for the LIL max diagnostic
  std::size_t lil_checkpoints = 256;
  std::size_t record_head = 0;               // leading trajectory states to keep
  std::function<double(double)> g_eval;      // Poisson solution for the martingale increments
  std::function<double(double)> pg_eval;     // P applied to it
};

/// Long-run CLT/LIL experiment on one trajectory: running mean, batch-means
/// variance with its doubling history, standardized batch means with a KS
/// normality test, the LIL track, and martingale diagnostics.
struct CltReport {
  double mu_hat = 0.0;
  double mu_se = 0.0;
  std::vector<std::pair<std::size_t, double>> sigma2_n;
  double sigma2_limit = 0.0;
  bool sigma2_degenerate = false;
  std::vector<double> batch_z;
  double ks_stat = std::numeric_limits<double>::quiet_NaN();
  double ks_p = std::numeric_limits<double>::quiet_NaN();
  std::vector<stats::Series<double>> lil;
  double lil_max = std::numeric_limits<double>::quiet_NaN();
  double lil_min = std::numeric_limits<double>::quiet_NaN();
  std::size_t lil_range_lo = 0, lil_range_hi = 0;
  std::array<double, 4> tail_quarter_max{};  // max |f(X_n)| / n^(1+alpha) per quarter
  double tail_alpha = 0.5;
  std::vector<std::tuple<std::size_t, double, double>> lindeberg;  // (n, eps, value)
  std::vector<double> head_states;           // X_0.. when record_head > 0
};

template <typename F>
CltReport clt_experiment(const StepDistribution& rho, F&& f, double x0, std::size_t n_steps,
                         std::size_t batch_size, std::uint64_t seed, const CltOptions& opts = {}) {
  if (batch_size < 1000)
    fail(ErrorCode::BatchTooSmall, "batch_size must be >= 1000, got " + std::to_string(batch_size));
  if (n_steps < 2 * batch_size)
    fail(ErrorCode::ConfigInvalid, "need at least two batches of steps");
  lindley::require_negative_drift(rho);
  if (!(rho.moment_order() > 4.0 + opts.f_class_alpha))
    fail(ErrorCode::MomentTooLow, "CLT path requires a declared moment order > 4 + alpha");

  CltReport rep;
  rep.tail_alpha = opts.tail_alpha;

  // Pass 1: batch means, running mean, sigma^2 doubling history.
  const std::size_t n_batches = n_steps / batch_size;
  std::vector<double> batch_means;
  batch_means.reserve(n_batches);
  {
    rng::Stream stream = rng::Stream::from(seed, lane::kClt);
    double x = x0;
    double total = f(x0);  // f(X_0)
    double batch_acc = f(x0);
    std::size_t in_batch = 1;
    for (std::size_t k = 1; k < n_steps; ++k) {
      x = lindley::step(x, rho.sample(stream));
      const double v = f(x);
      total += v;
      batch_acc += v;
      if (++in_batch == batch_size) {
        batch_means.push_back(batch_acc / static_cast<double>(batch_size));
        batch_acc = 0.0;
        in_batch = 0;
      }
    }
    rep.mu_hat = total / static_cast<double>(n_steps);
  }
  auto sigma2_at = [&](std::size_t k_batches) {
    double mean = 0.0;
    for (std::size_t j = 0; j < k_batches; ++j) mean += batch_means[j];
    mean /= static_cast<double>(k_batches);
    double ss = 0.0;
    for (std::size_t j = 0; j < k_batches; ++j) {
      const double d = batch_means[j] - mean;
      ss += d * d;
    }
    return static_cast<double>(batch_size) * ss / static_cast<double>(k_batches - 1);
  };
  {
    std::vector<std::size_t> ks;
    for (std::size_t k = 2; k < batch_means.size(); k *= 2) ks.push_back(k);
    if (batch_means.size() >= 4) ks.push_back(batch_means.size() / 2);
    ks.push_back(batch_means.size());
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    for (std::size_t k : ks) rep.sigma2_n.emplace_back(k * batch_size, sigma2_at(k));
  }
  rep.sigma2_limit = rep.sigma2_n.back().second;
  rep.sigma2_degenerate = !(rep.sigma2_limit > 0.0);
  rep.mu_se = rep.sigma2_degenerate
                  ? 0.0
                  : std::sqrt(rep.sigma2_limit / static_cast<double>(n_steps));

  if (!rep.sigma2_degenerate) {
    const double sd_bm = std::sqrt(rep.sigma2_limit / static_cast<double>(batch_size));
    double bm_mean = 0.0;
    for (double b : batch_means) bm_mean += b;
    bm_mean /= static_cast<double>(batch_means.size());
    rep.batch_z.reserve(batch_means.size());
    for (double b : batch_means) rep.batch_z.push_back((b - bm_mean) / sd_bm);
    if (rep.batch_z.size() >= 50) {
      const auto ks = stats::ks_normal_test(rep.batch_z);
      rep.ks_stat = ks.d;
      rep.ks_p = ks.p;
    }
  }

  // Pass 2: replay the identical path for the LIL track, the tail-decay
  // diagnostic and the martingale increments.
  const bool do_lindeberg = static_cast<bool>(opts.g_eval) && static_cast<bool>(opts.pg_eval);
  std::vector<double> increments;
  if (do_lindeberg) increments.reserve(std::min(n_steps, opts.lindeberg_cap));
  std::vector<std::size_t> checkpoints;
  for (std::size_t i = 0; i < opts.lil_checkpoints; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(opts.lil_checkpoints - 1);
    const auto n = static_cast<std::size_t>(std::floor(16.0 * std::pow(
        static_cast<double>(n_steps) / 16.0, t)));
    checkpoints.push_back(std::max<std::size_t>(n, 16));
  }
  checkpoints.push_back(n_steps);
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());

  rep.lil_range_lo = std::max<std::size_t>(std::min(opts.lil_range_lo, n_steps), 16);
  rep.lil_range_hi = n_steps;
  {
    rng::Stream stream = rng::Stream::from(seed, lane::kClt);
    double x = x0;
    double s_n = f(x0);
    double lil_hi = -std::numeric_limits<double>::infinity();
    double lil_lo = std::numeric_limits<double>::infinity();
    std::vector<std::pair<std::size_t, double>> lil_points;
    auto checkpoint_it = checkpoints.begin();
    const std::size_t quarter = std::max<std::size_t>(n_steps / 4, 1);
    rep.tail_quarter_max = {0.0, 0.0, 0.0, 0.0};
    if (opts.record_head > 0) rep.head_states.push_back(x0);
    for (std::size_t n = 1; n <= n_steps; ++n) {
      // n here counts terms f(X_0..X_{n-1}) already in s_n.
      if (!rep.sigma2_degenerate && n >= rep.lil_range_lo) {
        const double l = stats::lil_value(n, s_n, rep.mu_hat, rep.sigma2_limit);
        lil_hi = std::max(lil_hi, l);
        lil_lo = std::min(lil_lo, l);
      }
      if (checkpoint_it != checkpoints.end() && n == *checkpoint_it) {
        lil_points.emplace_back(n, s_n);
        ++checkpoint_it;
      }
      if (n == n_steps) break;
      const double x_prev = x;
      x = lindley::step(x, rho.sample(stream));
      if (rep.head_states.size() < opts.record_head) rep.head_states.push_back(x);
      const double v = f(x);
      s_n += v;
      const std::size_t q = std::min<std::size_t>(n / quarter, 3);
      rep.tail_quarter_max[q] = std::max(
          rep.tail_quarter_max[q],
          std::abs(v) / std::pow(static_cast<double>(n), 1.0 + opts.tail_alpha));
      if (do_lindeberg && increments.size() < opts.lindeberg_cap)
        increments.push_back(opts.g_eval(x) - opts.pg_eval(x_prev));
    }
    if (!rep.sigma2_degenerate) {
      rep.lil = stats::lil_track(lil_points, rep.mu_hat, rep.sigma2_limit);
      rep.lil_max = lil_hi;
      rep.lil_min = lil_lo;
    }
  }
  if (do_lindeberg) {
    for (const auto& s : stats::lindeberg_statistic(increments, opts.lindeberg_eps))
      rep.lindeberg.emplace_back(s.n, opts.lindeberg_eps, s.value);
  }
  return rep;
}

}  // namespace induct::excursion_mc
