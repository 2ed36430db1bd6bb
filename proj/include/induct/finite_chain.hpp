#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "induct/error.hpp"

namespace induct::finite_chain {

inline constexpr double kRowSumTol = 1e-12;      // input validation
inline constexpr double kStochasticTolQ = 1e-10; // derived operator Q
inline constexpr double kIdentityTol = 1e-9;     // operator identities

/// Dense row-stochastic transition kernel on a finite state set.
class StochasticMatrix {
 public:
  /// Validates entries >= 0 and row sums within `tol` of 1, then
  /// renormalizes each row exactly to sum 1.
  static StochasticMatrix validate(const Eigen::MatrixXd& raw, double tol = kRowSumTol) {
    if (raw.rows() != raw.cols())
      fail(ErrorCode::DimensionMismatch, "transition matrix must be square");
    const auto n = raw.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = raw(i, j);
        if (v < 0.0)
          fail(ErrorCode::NegativeEntry, "entry (" + std::to_string(i) + "," +
               std::to_string(j) + ") = " + std::to_string(v));
        sum += v;
      }
      if (std::abs(sum - 1.0) > tol)
        fail(ErrorCode::RowSumOutOfTolerance, "row " + std::to_string(i) +
             " sums to " + std::to_string(sum));
    }
    StochasticMatrix out;
    out.p_ = raw;
    for (Eigen::Index i = 0; i < n; ++i) out.p_.row(i) /= out.p_.row(i).sum();
    return out;
  }

  Eigen::Index size() const { return p_.rows(); }
  const Eigen::MatrixXd& matrix() const { return p_; }

 private:
  StochasticMatrix() = default;
  Eigen::MatrixXd p_;
};

/// Return set Y for the first-return stopping time.
struct ReturnSet {
  std::vector<bool> mask;

  static ReturnSet from_indices(Eigen::Index n, std::span<const Eigen::Index> indices) {
    ReturnSet y;
    y.mask.assign(static_cast<std::size_t>(n), false);
    for (auto i : indices) {
      if (i < 0 || i >= n)
        fail(ErrorCode::DimensionMismatch, "return-set index out of range: " + std::to_string(i));
      y.mask[static_cast<std::size_t>(i)] = true;
    }
    y.require_nonempty();
    return y;
  }

  void require_nonempty() const {
    if (std::find(mask.begin(), mask.end(), true) == mask.end())
      fail(ErrorCode::EmptyReturnSet, "return set Y must contain at least one state");
  }

  Eigen::VectorXd indicator() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(mask.size()));
    for (std::size_t i = 0; i < mask.size(); ++i) v[static_cast<Eigen::Index>(i)] = mask[i] ? 1.0 : 0.0;
    return v;
  }
};

/// The operators induced by the first return to Y:
///   S f = P(f 1_Y),  R = sum_k (P 1_{Y^c})^k = (I - P D_{Y^c})^{-1},  Q = R S.
struct InducedSystem {
  Eigen::MatrixXd s;
  Eigen::MatrixXd r;
  Eigen::MatrixXd q;
  Eigen::VectorXd mean_return;  // R 1 = E_x tau
};

/// Nonnegative measure stored unnormalized with explicit total mass.
struct MeasureVec {
  Eigen::VectorXd weights;
  double mass = 0.0;

  static MeasureVec from_weights(Eigen::VectorXd w) {
    MeasureVec m;
    m.mass = w.sum();
    m.weights = std::move(w);
    return m;
  }
};

namespace detail {

/// True iff from every state there is a positive-probability path into Y
/// whose intermediate states stay in Y^c (the condition for tau < inf a.s.).
inline bool every_state_reaches(const Eigen::MatrixXd& p, const ReturnSet& y) {
  const auto n = p.rows();
  std::vector<bool> reaches(static_cast<std::size_t>(n), false);
  bool changed = true;
  while (changed) {
    changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (reaches[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (p(i, j) <= 0.0) continue;
        if (y.mask[static_cast<std::size_t>(j)] || reaches[static_cast<std::size_t>(j)]) {
          reaches[static_cast<std::size_t>(i)] = true;
          changed = true;
          break;
        }
      }
    }
  }
  return std::find(reaches.begin(), reaches.end(), false) == reaches.end();
}

inline void clamp_tiny_negatives(Eigen::MatrixXd& m, const char* label) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) < 0.0) {
        if (m(i, j) < -1e-12)
          fail(ErrorCode::Internal, std::string(label) + " has a negative entry beyond round-off");
        m(i, j) = 0.0;
      }
    }
}

}  // namespace detail

/// Builds S, R, Q and E.tau for the first return to Y. R is obtained from
/// one dense LU solve of (I - P D_{Y^c}) X = I rather than by summing the
/// geometric series.
inline InducedSystem induced_operators(const StochasticMatrix& p, const ReturnSet& y) {
  const auto n = p.size();
  if (static_cast<Eigen::Index>(y.mask.size()) != n)
    fail(ErrorCode::DimensionMismatch, "return set size does not match chain size");
  y.require_nonempty();
  if (!detail::every_state_reaches(p.matrix(), y))
    fail(ErrorCode::YUnreachable, "some state never reaches Y; E_x tau is infinite");

  const Eigen::VectorXd ind_y = y.indicator();
  const Eigen::MatrixXd m = p.matrix() * (Eigen::VectorXd::Ones(n) - ind_y).asDiagonal();

  Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(n, n) - m);
  if (!lu.isInvertible())
    fail(ErrorCode::Internal, "reachability check passed but (I - P D_{Y^c}) is singular");

  InducedSystem sys;
  sys.r = lu.solve(Eigen::MatrixXd::Identity(n, n));
  detail::clamp_tiny_negatives(sys.r, "R");
  // Rows of M that are exactly zero decouple: R row = e_x, E_x tau = 1.
  for (Eigen::Index i = 0; i < n; ++i) {
    if (m.row(i).isZero(0.0)) {
      sys.r.row(i).setZero();
      sys.r(i, i) = 1.0;
    }
  }
  sys.s = p.matrix() * ind_y.asDiagonal();
  sys.q = sys.r * sys.s;
  detail::clamp_tiny_negatives(sys.q, "Q");
  sys.mean_return = sys.r * Eigen::VectorXd::Ones(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(sys.q.row(i).sum() - 1.0) > kStochasticTolQ)
      fail(ErrorCode::Internal, "row " + std::to_string(i) + " of Q is not stochastic within 1e-10");
  }
  return sys;
}

/// Max-abs deviations of the four operator identities.
struct IdentityReport {
  double r_plus_q_vs_i_plus_rp = 0.0;   // (R+Q)f = (I+RP)f
  double i_plus_pr_vs_i_plus_s_r = 0.0; // (I+PR)f = (I+S)Rf
  double i_plus_s_q_vs_s_plus_pq = 0.0; // (I+S)Qf = (S+PQ)f
  double rs_vs_q = 0.0;                 // RSf = Qf

  double max_deviation() const {
    return std::max({r_plus_q_vs_i_plus_rp, i_plus_pr_vs_i_plus_s_r,
                     i_plus_s_q_vs_s_plus_pq, rs_vs_q});
  }
  bool pass(double tol = kIdentityTol) const { return max_deviation() <= tol; }
};

inline IdentityReport check_identities(const StochasticMatrix& p, const InducedSystem& sys) {
  const auto n = p.size();
  if (sys.r.rows() != n || sys.s.rows() != n || sys.q.rows() != n)
    fail(ErrorCode::DimensionMismatch, "induced system does not match chain size");
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  IdentityReport rep;
  rep.r_plus_q_vs_i_plus_rp = (sys.r + sys.q - eye - sys.r * p.matrix()).cwiseAbs().maxCoeff();
  rep.i_plus_pr_vs_i_plus_s_r =
      (eye + p.matrix() * sys.r - (eye + sys.s) * sys.r).cwiseAbs().maxCoeff();
  rep.i_plus_s_q_vs_s_plus_pq =
      ((eye + sys.s) * sys.q - sys.s - p.matrix() * sys.q).cwiseAbs().maxCoeff();
  rep.rs_vs_q = (sys.r * sys.s - sys.q).cwiseAbs().maxCoeff();
  return rep;
}

/// Unique stationary probability vector, by a direct solve of (P^T - I) mu = 0
/// with one equation replaced by the normalization sum(mu) = 1.
inline MeasureVec invariant_measure(const StochasticMatrix& p) {
  const auto n = p.size();
  Eigen::MatrixXd a = p.matrix().transpose() - Eigen::MatrixXd::Identity(n, n);

  Eigen::FullPivLU<Eigen::MatrixXd> rank_lu(a);
  rank_lu.setThreshold(1e-10);
  const Eigen::Index null_dim = n - rank_lu.rank();
  if (null_dim > 1)
    fail(ErrorCode::NonUniqueStationary,
         "null space dimension " + std::to_string(null_dim) + " > 1 (multiple recurrent classes)");

  a.row(0).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[0] = 1.0;
  Eigen::VectorXd mu = a.partialPivLu().solve(rhs);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mu[i] < 0.0) {
      if (mu[i] < -1e-10) fail(ErrorCode::Internal, "stationary solve produced a negative weight");
      mu[i] = 0.0;
    }
  }
  mu /= mu.sum();

  const double residual = (p.matrix().transpose() * mu - mu).cwiseAbs().maxCoeff();
  if (residual > 1e-12)
    fail(ErrorCode::Internal, "stationary residual " + std::to_string(residual) + " > 1e-12");
  return MeasureVec::from_weights(std::move(mu));
}

/// Pushforward T* m, i.e. weights -> T^T weights. Not renormalized: S* mu and
/// R* nu are genuinely non-probability measures.
inline MeasureVec pushforward(const MeasureVec& m, const Eigen::MatrixXd& t) {
  if (t.rows() != t.cols() || t.rows() != m.weights.size())
    fail(ErrorCode::DimensionMismatch, "operator and measure dimensions disagree");
  return MeasureVec::from_weights(t.transpose() * m.weights);
}

struct KacCheck {
  double lhs = 0.0;  // mu . f
  double rhs = 0.0;  // mu . (S R f)
  double deviation() const { return std::abs(lhs - rhs); }
};

/// Generalized Kac lemma on a finite chain: integrals of f and SRf against
/// the stationary measure coincide.
inline KacCheck kac_check(const StochasticMatrix& p, const ReturnSet& y,
                          const Eigen::VectorXd& f) {
  if (f.size() != p.size())
    fail(ErrorCode::DimensionMismatch, "test function length does not match chain size");
  const MeasureVec mu = invariant_measure(p);
  const InducedSystem sys = induced_operators(p, y);
  KacCheck out;
  out.lhs = mu.weights.dot(f);
  out.rhs = mu.weights.dot(sys.s * (sys.r * f));
  return out;
}

/// Deviations for the invariant-measure bijection mu <-> nu via S* and R*.
struct BijectionReport {
  double smu_q_invariance = 0.0;   // || Q^T (S* mu) - S* mu ||_inf
  double rstar_sstar_mu = 0.0;     // || R* S* mu - mu ||_inf
  double sstar_rstar_nu = 0.0;     // || S* R* nu - nu ||_inf
  double rnu_p_invariance = 0.0;   // || P^T (R* nu) - R* nu ||_inf

  double max_deviation() const {
    return std::max({smu_q_invariance, rstar_sstar_mu, sstar_rstar_nu, rnu_p_invariance});
  }
  bool pass(double tol = kIdentityTol) const { return max_deviation() <= tol; }
};

inline BijectionReport measure_bijection_check(const StochasticMatrix& p, const ReturnSet& y) {
  const MeasureVec mu = invariant_measure(p);
  const InducedSystem sys = induced_operators(p, y);
  const StochasticMatrix q = StochasticMatrix::validate(sys.q, kStochasticTolQ);
  const MeasureVec nu = invariant_measure(q);

  const MeasureVec smu = pushforward(mu, sys.s);
  const MeasureVec rsmu = pushforward(smu, sys.r);
  const MeasureVec rnu = pushforward(nu, sys.r);
  const MeasureVec srnu = pushforward(rnu, sys.s);

  BijectionReport rep;
  rep.smu_q_invariance = (sys.q.transpose() * smu.weights - smu.weights).cwiseAbs().maxCoeff();
  rep.rstar_sstar_mu = (rsmu.weights - mu.weights).cwiseAbs().maxCoeff();
  rep.sstar_rstar_nu = (srnu.weights - nu.weights).cwiseAbs().maxCoeff();
  rep.rnu_p_invariance = (p.matrix().transpose() * rnu.weights - rnu.weights).cwiseAbs().maxCoeff();
  return rep;
}

}  // namespace induct::finite_chain
