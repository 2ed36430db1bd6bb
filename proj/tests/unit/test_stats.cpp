#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "induct/rng.hpp"
#include "induct/special.hpp"
#include "induct/stats.hpp"

using namespace induct;

TEST_CASE("counter-based streams are deterministic and lane-separated") {
  rng::Stream a = rng::Stream::from(7, 1, 0);
  rng::Stream b = rng::Stream::from(7, 1, 0);
  rng::Stream other_lane = rng::Stream::from(7, 2, 0);
  rng::Stream other_worker = rng::Stream::from(7, 1, 1);
  bool lanes_differ = false, workers_differ = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u64();
    REQUIRE(va == b.next_u64());
    if (va != other_lane.next_u64()) lanes_differ = true;
    if (va != other_worker.next_u64()) workers_differ = true;
  }
  REQUIRE(lanes_differ);
  REQUIRE(workers_differ);

  rng::Stream u(rng::derive_key(123, 9));
  double min_v = 1.0, max_v = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double v = u.next_unit();
    REQUIRE(v > 0.0);
    REQUIRE(v <= 1.0);
    min_v = std::min(min_v, v);
    max_v = std::max(max_v, v);
  }
  REQUIRE(min_v < 0.01);
  REQUIRE(max_v > 0.99);

  // Box-Muller normals have sane first moments at this sample size.
  rng::Stream g(rng::derive_key(123, 10));
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = g.next_normal();
    sum += z;
    sq += z * z;
  }
  REQUIRE(std::abs(sum / n) < 0.02);
  REQUIRE(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("normal quantile and cdf are inverse to each other") {
  for (double p : {1e-12, 1e-6, 0.01, 0.31, 0.5, 0.7, 0.975, 1.0 - 1e-9}) {
    const double x = p == 0.5 ? 0.0 : special::normal_quantile(p);
    REQUIRE(special::normal_cdf(x) == Catch::Approx(p).epsilon(1e-12));
  }
  REQUIRE(special::normal_quantile(0.975) == Catch::Approx(1.959963984540054).margin(1e-12));
  REQUIRE(special::normal_quantile(0.5) == 0.0);
}

TEST_CASE("chi-square survival matches its closed forms") {
  REQUIRE(special::chi2_sf(0.0, 3) == 1.0);
  // One degree of freedom: P(chi2 > z^2) = 2 (1 - Phi(z)).
  for (double z : {0.5, 1.0, 1.959963984540054, 3.0})
    REQUIRE(special::chi2_sf(z * z, 1) == Catch::Approx(2.0 * special::normal_sf(z)).epsilon(1e-12));
  // Two degrees of freedom: exponential with rate 1/2.
  for (double x : {0.1, 1.0, 5.0, 20.0})
    REQUIRE(special::chi2_sf(x, 2) == Catch::Approx(std::exp(-0.5 * x)).epsilon(1e-12));
}

TEST_CASE("ratio_ci handles degenerate and synthetic data") {
  SECTION("a_i = b_i gives estimate 1 with zero width") {
    stats::RatioAccumulator acc;
    rng::Stream stream(rng::derive_key(1, 1));
    for (int i = 0; i < 100; ++i) {
      const double v = 1.0 + stream.next_unit();
      acc.add(v, v);
    }
    const auto ci = stats::ratio_ci(acc, 0.95);
    REQUIRE(ci.estimate == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(ci.half_width <= 1e-12);
  }
  SECTION("constants give c/d with zero width") {
    stats::RatioAccumulator acc;
    for (int i = 0; i < 50; ++i) acc.add(3.0, 4.0);
    const auto ci = stats::ratio_ci(acc, 0.95);
    REQUIRE(ci.estimate == Catch::Approx(0.75).margin(1e-15));
    REQUIRE(ci.half_width <= 1e-12);
  }
  SECTION("too few samples is an error") {
    stats::RatioAccumulator acc;
    for (int i = 0; i < 10; ++i) acc.add(1.0, 2.0);
    REQUIRE_THROWS_AS(stats::ratio_ci(acc, 0.95), InductError);
  }
  SECTION("scale equivariance") {
    stats::RatioAccumulator acc, scaled;
    rng::Stream stream(rng::derive_key(1, 2));
    for (int i = 0; i < 200; ++i) {
      const double b = 1.0 + stream.next_unit();
      const double a = 0.7 * b + 0.1 * (stream.next_unit() - 0.5);
      acc.add(a, b);
      scaled.add(-2.0 * a, b);
    }
    const auto ci = stats::ratio_ci(acc, 0.95);
    const auto ci2 = stats::ratio_ci(scaled, 0.95);
    REQUIRE(ci2.estimate == Catch::Approx(-2.0 * ci.estimate).epsilon(1e-12));
    REQUIRE(ci2.half_width == Catch::Approx(2.0 * ci.half_width).epsilon(1e-12));
  }
  SECTION("coverage of the nominal level on synthetic ratios") {
    rng::Stream stream(rng::derive_key(1, 3));
    const double theta = 0.7;
    int covered = 0;
    const int reps = 1000;
    for (int r = 0; r < reps; ++r) {
      stats::RatioAccumulator acc;
      for (int i = 0; i < 200; ++i) {
        const double b = 4.0 + 2.0 * stream.next_unit();
        const double a = theta * b + 0.5 * stream.next_normal();
        acc.add(a, b);
      }
      const auto ci = stats::ratio_ci(acc, 0.95);
      if (std::abs(ci.estimate - theta) <= ci.half_width) ++covered;
    }
    REQUIRE(covered >= 930);
  }
}

TEST_CASE("ks_normal_test identifies exact quantile grids and degenerate data") {
  SECTION("inverse-CDF grid is nearly perfect") {
    const int n = 10000;
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i)
      q[i] = special::normal_quantile((i + 0.5) / static_cast<double>(n));
    const auto res = stats::ks_normal_test(q);
    REQUIRE(res.d == Catch::Approx(0.5 / n).epsilon(0.01));
    REQUIRE(res.p >= 0.999);
  }
  SECTION("all samples zero") {
    const std::vector<double> zeros(100, 0.0);
    const auto res = stats::ks_normal_test(zeros);
    REQUIRE(res.d == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(res.p <= 1e-6);
  }
  SECTION("too few samples") {
    const std::vector<double> few(10, 0.1);
    REQUIRE_THROWS_AS(stats::ks_normal_test(few), InductError);
  }
  SECTION("permutation invariance") {
    rng::Stream stream(rng::derive_key(1, 4));
    std::vector<double> x(200);
    for (auto& v : x) v = stream.next_normal();
    const auto a = stats::ks_normal_test(x);
    std::reverse(x.begin(), x.end());
    std::swap(x[3], x[77]);
    const auto b = stats::ks_normal_test(x);
    REQUIRE(a.d == b.d);
    REQUIRE(a.p == b.p);
  }
}

TEST_CASE("kolmogorov_sf is a proper survival function") {
  REQUIRE(stats::kolmogorov_sf(1e-12) == 1.0);
  REQUIRE(stats::kolmogorov_sf(0.05) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(stats::kolmogorov_sf(5.0) <= 1e-10);
  double prev = 1.0;
  for (double l = 0.05; l < 3.0; l += 0.05) {
    const double v = stats::kolmogorov_sf(l);
    REQUIRE(v <= prev + 1e-9);
    prev = v;
  }
  // Branch continuity around the series switch.
  REQUIRE(stats::kolmogorov_sf(0.39999) == Catch::Approx(stats::kolmogorov_sf(0.40001)).margin(1e-7));
}

TEST_CASE("lil_track evaluates the normalized fluctuation") {
  std::vector<std::pair<std::size_t, double>> sums;
  const double mu = 0.3, sigma2 = 2.0;
  for (std::size_t n : {4u, 16u, 100u, 10000u}) {
    sums.emplace_back(n, n * mu);
  }
  SECTION("exact mean gives zero") {
    const auto track = stats::lil_track(sums, mu, sigma2);
    REQUIRE(track.size() == 3);  // n = 4 dropped
    for (const auto& e : track) REQUIRE(e.value == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("definition inversion gives one") {
    std::vector<std::pair<std::size_t, double>> shifted;
    for (auto [n, s] : sums)
      shifted.emplace_back(n, s + std::sqrt(2.0 * n * sigma2 * std::log(std::log(double(n)))));
    const auto track = stats::lil_track(shifted, mu, sigma2);
    for (const auto& e : track) REQUIRE(e.value == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("antisymmetry under reflection of the sums") {
    std::vector<std::pair<std::size_t, double>> plus, minus;
    rng::Stream stream(rng::derive_key(1, 5));
    for (std::size_t n : {16u, 64u, 256u}) {
      const double s = n * mu + stream.next_normal() * std::sqrt(double(n));
      plus.emplace_back(n, s);
      minus.emplace_back(n, 2.0 * n * mu - s);
    }
    const auto a = stats::lil_track(plus, mu, sigma2);
    const auto b = stats::lil_track(minus, mu, sigma2);
    for (std::size_t i = 0; i < a.size(); ++i)
      REQUIRE(a[i].value == Catch::Approx(-b[i].value).margin(1e-12));
  }
  SECTION("degenerate variance is an error") {
    REQUIRE_THROWS_AS(stats::lil_track(sums, mu, 0.0), InductError);
  }
}

TEST_CASE("lindeberg_statistic truncates as the threshold grows") {
  SECTION("bounded increments vanish beyond (M/eps)^2") {
    std::vector<double> d(64, 0.5);
    for (std::size_t i = 0; i < d.size(); i += 2) d[i] = -0.5;
    const auto series = stats::lindeberg_statistic(d, 0.1);
    for (const auto& e : series) {
      if (e.n > 25) REQUIRE(e.value == 0.0);
      else REQUIRE(e.value == Catch::Approx(0.25).margin(1e-15));
    }
  }
  SECTION("boundary case is inclusive") {
    const std::vector<double> d{0.3};
    const auto series = stats::lindeberg_statistic(d, 0.3);
    REQUIRE(series.size() == 1);
    REQUIRE(series[0].n == 1);
    REQUIRE(series[0].value == Catch::Approx(0.09).margin(1e-15));
  }
  SECTION("non-increasing in eps for fixed n") {
    rng::Stream stream(rng::derive_key(1, 6));
    std::vector<double> d(1024);
    for (auto& v : d) v = stream.next_normal();
    const auto a = stats::lindeberg_statistic(d, 0.05);
    const auto b = stats::lindeberg_statistic(d, 0.1);
    const auto c = stats::lindeberg_statistic(d, 0.4);
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(b[i].value <= a[i].value + 1e-15);
      REQUIRE(c[i].value <= b[i].value + 1e-15);
    }
  }
}
