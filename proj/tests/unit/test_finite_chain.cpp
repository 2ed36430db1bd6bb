#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "induct/finite_chain.hpp"
#include "oracle_helpers.hpp"

using namespace induct;
using finite_chain::StochasticMatrix;
using finite_chain::ReturnSet;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

// The two-state worked example: P = [[1/2,1/2],[1/2,1/2]], Y = {1}.
StochasticMatrix symmetric2() { return StochasticMatrix::validate(mat2(0.5, 0.5, 0.5, 0.5)); }
ReturnSet y_second() {
  const Eigen::Index idx[] = {1};
  return ReturnSet::from_indices(2, idx);
}

}  // namespace

TEST_CASE("validate_stochastic accepts valid rows and rejects bad ones") {
  REQUIRE_NOTHROW(StochasticMatrix::validate(mat2(0.5, 0.5, 0.5, 0.5)));
  REQUIRE_NOTHROW(StochasticMatrix::validate(mat2(1.0, 0.0, 0.2, 0.8)));

  try {
    StochasticMatrix::validate(mat2(0.6, 0.5, 0.5, 0.5));
    FAIL("expected RowSumOutOfTolerance");
  } catch (const InductError& e) {
    REQUIRE(e.code() == ErrorCode::RowSumOutOfTolerance);
  }

  try {
    StochasticMatrix::validate(mat2(-0.1, 1.1, 0.5, 0.5));
    FAIL("expected NegativeEntry");
  } catch (const InductError& e) {
    REQUIRE(e.code() == ErrorCode::NegativeEntry);
  }

  Eigen::MatrixXd rect(2, 3);
  rect.setZero();
  REQUIRE_THROWS_AS(StochasticMatrix::validate(rect), InductError);
}

TEST_CASE("induced_operators reproduces the hand-solved 2-state system") {
  const auto sys = finite_chain::induced_operators(symmetric2(), y_second());
  // Hand solve of (I - P diag(1,0)) X = I and the path expansion:
  REQUIRE(sys.r(0, 0) == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(sys.r(0, 1) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(sys.r(1, 0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(sys.r(1, 1) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(sys.s(0, 0) == 0.0);
  REQUIRE(sys.s(0, 1) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(sys.s(1, 0) == 0.0);
  REQUIRE(sys.s(1, 1) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(sys.q(0, 0) == 0.0);
  REQUIRE(sys.q(0, 1) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(sys.q(1, 1) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(sys.mean_return[0] == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(sys.mean_return[1] == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("induced_operators with Y = all states collapses to one step") {
  const auto p = StochasticMatrix::validate(mat2(0.3, 0.7, 0.6, 0.4));
  const Eigen::Index idx[] = {0, 1};
  const auto sys = finite_chain::induced_operators(p, ReturnSet::from_indices(2, idx));
  REQUIRE((sys.r - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((sys.s - p.matrix()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((sys.q - p.matrix()).cwiseAbs().maxCoeff() <= 1e-15);
  REQUIRE(sys.mean_return[0] == 1.0);
  REQUIRE(sys.mean_return[1] == 1.0);
}

TEST_CASE("induced_operators rejects unreachable Y") {
  const auto p = StochasticMatrix::validate(mat2(1.0, 0.0, 0.0, 1.0));
  try {
    finite_chain::induced_operators(p, y_second());
    FAIL("expected YUnreachable");
  } catch (const InductError& e) {
    REQUIRE(e.code() == ErrorCode::YUnreachable);
  }
}

TEST_CASE("check_identities is exact on the worked example") {
  const auto p = symmetric2();
  const auto sys = finite_chain::induced_operators(p, y_second());
  const auto rep = finite_chain::check_identities(p, sys);
  REQUIRE(rep.max_deviation() <= 1e-12);
}

TEST_CASE("operator identities hold on random irreducible chains") {
  rng::Stream stream(rng::derive_key(20240810, 1));
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(stream.next_unit() * 13.0);
    const auto p = StochasticMatrix::validate(oracle::random_chain(n, stream));
    const auto mask = oracle::random_return_set(n, stream);
    ReturnSet y;
    y.mask = mask;
    const auto sys = finite_chain::induced_operators(p, y);
    const auto rep = finite_chain::check_identities(p, sys);
    INFO("trial " << trial << " n=" << n << " max dev " << rep.max_deviation());
    REQUIRE(rep.max_deviation() <= 1e-9);

    // Structural invariants of the induced system.
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      REQUIRE(std::abs(sys.q.row(i).sum() - 1.0) <= 1e-10);
      REQUIRE(sys.mean_return[i] >= 1.0 - 1e-12);
      REQUIRE(sys.r(i, i) >= 1.0 - 1e-12);
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        if (!y.mask[static_cast<std::size_t>(j)]) REQUIRE(sys.q(i, j) == 0.0);
        REQUIRE(sys.q(i, j) >= 0.0);
        REQUIRE(sys.r(i, j) >= 0.0);
        REQUIRE(sys.s(i, j) >= 0.0);
      }
    }
  }
}

TEST_CASE("mean_return is exactly 1 for states that step straight into Y") {
  // State 0 moves to Y = {1,2} with probability 1.
  Eigen::MatrixXd m(3, 3);
  m << 0.0, 0.4, 0.6,
       0.3, 0.2, 0.5,
       0.25, 0.25, 0.5;
  const auto p = StochasticMatrix::validate(m);
  const Eigen::Index idx[] = {1, 2};
  const auto sys = finite_chain::induced_operators(p, ReturnSet::from_indices(3, idx));
  REQUIRE(sys.mean_return[0] == 1.0);
  REQUIRE(sys.mean_return[1] > 1.0);
}

TEST_CASE("brute-force truncated expectations match R f and Q f on small chains") {
  rng::Stream stream(rng::derive_key(20240810, 2));
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(stream.next_unit() * 5.0);
    const auto p = StochasticMatrix::validate(oracle::random_chain(n, stream));
    const auto mask = oracle::random_return_set(n, stream);
    ReturnSet y;
    y.mask = mask;
    const auto f = oracle::random_vector(n, stream);
    const auto sys = finite_chain::induced_operators(p, y);

    const int depth = 40;
    const auto truncated = oracle::truncated_return_expectations(p.matrix(), mask, f, depth);
    const double ratio = oracle::survival_ratio(p.matrix(), mask);
    REQUIRE(ratio < 1.0);
    double f_max = 0.0;
    for (double v : f) f_max = std::max(f_max, std::abs(v));

    Eigen::VectorXd fv(n);
    for (int i = 0; i < n; ++i) fv[i] = f[static_cast<std::size_t>(i)];
    const Eigen::VectorXd rf = sys.r * fv;
    const Eigen::VectorXd qf = sys.q * fv;
    for (int x = 0; x < n; ++x) {
      const double r_bound =
          f_max * truncated.surviving_mass[x] / (1.0 - ratio) * 1.0001 + 1e-12;
      const double q_bound = f_max * truncated.surviving_mass[x] * 1.0001 + 1e-12;
      REQUIRE(std::abs(rf[x] - truncated.r_f[x]) <= r_bound);
      REQUIRE(std::abs(qf[x] - truncated.q_f[x]) <= q_bound);
    }
  }
}

TEST_CASE("invariant_measure solves simple chains and detects reducibility") {
  SECTION("doubly stochastic 3-state chain is uniform") {
    Eigen::MatrixXd m(3, 3);
    m << 0.2, 0.3, 0.5,
         0.5, 0.2, 0.3,
         0.3, 0.5, 0.2;
    const auto mu = finite_chain::invariant_measure(StochasticMatrix::validate(m));
    for (int i = 0; i < 3; ++i) REQUIRE(mu.weights[i] == Catch::Approx(1.0 / 3).margin(1e-13));
    REQUIRE(mu.mass == Catch::Approx(1.0).margin(1e-13));
  }
  SECTION("symmetric 2-state chain") {
    const auto mu = finite_chain::invariant_measure(symmetric2());
    REQUIRE(mu.weights[0] == Catch::Approx(0.5).margin(1e-13));
    REQUIRE(mu.weights[1] == Catch::Approx(0.5).margin(1e-13));
  }
  SECTION("two closed classes are refused") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
    m(0, 1) = 1.0; m(1, 0) = 1.0;
    m(2, 3) = 1.0; m(3, 2) = 1.0;
    try {
      finite_chain::invariant_measure(StochasticMatrix::validate(m));
      FAIL("expected NonUniqueStationary");
    } catch (const InductError& e) {
      REQUIRE(e.code() == ErrorCode::NonUniqueStationary);
    }
  }
  SECTION("agrees with a long power iteration on random chains") {
    rng::Stream stream(rng::derive_key(20240810, 3));
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 3 + static_cast<int>(stream.next_unit() * 9.0);
      const auto p = StochasticMatrix::validate(oracle::random_chain(n, stream));
      const auto mu = finite_chain::invariant_measure(p);
      const auto ref = oracle::power_iteration_stationary(p.matrix());
      for (int i = 0; i < n; ++i) REQUIRE(mu.weights[i] == Catch::Approx(ref[i]).margin(1e-8));
    }
  }
}

TEST_CASE("pushforward computes adjoint actions") {
  const auto p = symmetric2();
  const auto sys = finite_chain::induced_operators(p, y_second());
  const auto mu = finite_chain::invariant_measure(p);

  const auto smu = finite_chain::pushforward(mu, sys.s);
  REQUIRE(smu.weights[0] == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(smu.weights[1] == Catch::Approx(0.5).margin(1e-14));
  REQUIRE(smu.mass == Catch::Approx(0.5).margin(1e-14));

  const auto rsmu = finite_chain::pushforward(smu, sys.r);
  REQUIRE(rsmu.weights[0] == Catch::Approx(0.5).margin(1e-14));
  REQUIRE(rsmu.weights[1] == Catch::Approx(0.5).margin(1e-14));

  const auto same = finite_chain::pushforward(mu, Eigen::MatrixXd::Identity(2, 2));
  REQUIRE(same.weights[0] == mu.weights[0]);
  REQUIRE(same.weights[1] == mu.weights[1]);

  REQUIRE_THROWS_AS(finite_chain::pushforward(mu, Eigen::MatrixXd::Identity(3, 3)), InductError);
}

TEST_CASE("kac_check validates the generalized Kac lemma") {
  SECTION("worked example with f = 1") {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
    const auto check = finite_chain::kac_check(symmetric2(), y_second(), ones);
    REQUIRE(check.lhs == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(check.rhs == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("Y = all states reduces to invariance of mu") {
    const auto p = StochasticMatrix::validate(mat2(0.3, 0.7, 0.6, 0.4));
    const Eigen::Index idx[] = {0, 1};
    Eigen::VectorXd f(2);
    f << 0.25, -1.75;
    const auto check = finite_chain::kac_check(p, ReturnSet::from_indices(2, idx), f);
    REQUIRE(check.deviation() <= 1e-12);
  }
  SECTION("50 random f per random chain") {
    rng::Stream stream(rng::derive_key(20240810, 4));
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 3 + static_cast<int>(stream.next_unit() * 12.0);
      const auto p = StochasticMatrix::validate(oracle::random_chain(n, stream));
      ReturnSet y;
      y.mask = oracle::random_return_set(n, stream);
      for (int k = 0; k < 50; ++k) {
        const auto f = oracle::random_vector(n, stream);
        Eigen::VectorXd fv(n);
        for (int i = 0; i < n; ++i) fv[i] = f[static_cast<std::size_t>(i)];
        REQUIRE(finite_chain::kac_check(p, y, fv).deviation() <= 1e-10);
      }
    }
  }
  SECTION("classical Kac: sum over Y of mu(y) E_y tau equals total mass") {
    const auto p = symmetric2();
    const auto mu = finite_chain::invariant_measure(p);
    const auto sys = finite_chain::induced_operators(p, y_second());
    const double lhs = mu.weights[1] * sys.mean_return[1];
    REQUIRE(lhs == Catch::Approx(mu.mass).margin(1e-12));
  }
}

TEST_CASE("measure bijection holds on the worked example and random chains") {
  SECTION("worked example") {
    const auto rep = finite_chain::measure_bijection_check(symmetric2(), y_second());
    REQUIRE(rep.max_deviation() <= 1e-12);
  }
  SECTION("Y = all states collapses to stationarity") {
    const auto p = StochasticMatrix::validate(mat2(0.3, 0.7, 0.6, 0.4));
    const Eigen::Index idx[] = {0, 1};
    const auto rep = finite_chain::measure_bijection_check(p, ReturnSet::from_indices(2, idx));
    REQUIRE(rep.max_deviation() <= 1e-12);
  }
  SECTION("random 10-state chains with small Y") {
    rng::Stream stream(rng::derive_key(20240810, 5));
    for (int trial = 0; trial < 20; ++trial) {
      const auto p = StochasticMatrix::validate(oracle::random_chain(10, stream));
      ReturnSet y;
      y.mask = oracle::random_return_set(10, stream);
      const auto rep = finite_chain::measure_bijection_check(p, y);
      INFO("trial " << trial << " max dev " << rep.max_deviation());
      REQUIRE(rep.max_deviation() <= 1e-9);
    }
  }
}
