#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "induct/error.hpp"

namespace induct::interp {

/// Piecewise-linear interpolant on sorted knots, extended linearly beyond
/// the end knots with the adjacent segment's slope.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<double> knots, std::vector<double> values)
      : knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.size() != values_.size() || knots_.size() < 2)
      fail(ErrorCode::DimensionMismatch, "PiecewiseLinear: need >= 2 matching knots/values");
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
      if (!(knots_[i] < knots_[i + 1]))
        fail(ErrorCode::Internal, "PiecewiseLinear: knots must be strictly increasing");
  }

  double operator()(double t) const {
    std::size_t hi = std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin();
    if (hi == 0) hi = 1;
    if (hi == knots_.size()) hi = knots_.size() - 1;
    const std::size_t lo = hi - 1;
    const double slope = (values_[hi] - values_[lo]) / (knots_[hi] - knots_[lo]);
    return values_[lo] + slope * (t - knots_[lo]);
  }

  std::span<const double> knots() const { return knots_; }
  std::span<const double> values() const { return values_; }
  double front() const { return knots_.front(); }
  double back() const { return knots_.back(); }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
};

}  // namespace induct::interp
