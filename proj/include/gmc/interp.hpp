#pragma once

#include <cstddef>
#include <vector>

namespace gmc {

// Monotone cubic (Fritsch-Carlson) interpolation on a uniform grid.
// Preserves monotone data without overshoot, which matters near the
// support boundary of compactly supported covariance profiles.
class PchipTable {
 public:
  PchipTable() = default;
  PchipTable(double x0, double x1, std::vector<double> values);

  double operator()(double x) const;

  double x0() const { return x0_; }
  double x1() const { return x1_; }
  std::size_t size() const { return y_.size(); }
  const std::vector<double>& values() const { return y_; }

 private:
  double x0_ = 0.0, x1_ = 1.0, dx_ = 1.0;
  std::vector<double> y_;
  std::vector<double> slope_;  // endpoint derivatives per node
};

// Not-a-knot cubic spline on a uniform grid, O(h^4) on smooth data. Used
// where interpolation error must stay far below covariance positivity
// tolerances.
class CubicSplineTable {
 public:
  CubicSplineTable() = default;
  CubicSplineTable(double x0, double x1, std::vector<double> values);

  double operator()(double x) const;

  double x0() const { return x0_; }
  double x1() const { return x1_; }
  std::size_t size() const { return y_.size(); }
  const std::vector<double>& values() const { return y_; }

 private:
  double x0_ = 0.0, x1_ = 1.0, dx_ = 1.0;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives per node
};

}  // namespace gmc
