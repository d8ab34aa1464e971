#include "gmc/interp.hpp"

#include <algorithm>
#include <cmath>

namespace gmc {

PchipTable::PchipTable(double x0, double x1, std::vector<double> values)
    : x0_(x0), x1_(x1), y_(std::move(values)) {
  const std::size_t n = y_.size();
  slope_.assign(n, 0.0);
  if (n < 2) return;
  dx_ = (x1_ - x0_) / static_cast<double>(n - 1);
  std::vector<double> d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / dx_;
  slope_[0] = d[0];
  slope_[n - 1] = d[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (d[i - 1] * d[i] <= 0.0) {
      slope_[i] = 0.0;
    } else {
      // Harmonic mean keeps the interpolant monotone on monotone data.
      slope_[i] = 2.0 * d[i - 1] * d[i] / (d[i - 1] + d[i]);
    }
  }
  // Fritsch-Carlson limiter at the ends.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (d[i] == 0.0) {
      slope_[i] = 0.0;
      slope_[i + 1] = 0.0;
    }
  }
}

CubicSplineTable::CubicSplineTable(double x0, double x1, std::vector<double> values)
    : x0_(x0), x1_(x1), y_(std::move(values)) {
  const std::size_t n = y_.size();
  m_.assign(n, 0.0);
  if (n < 4) return;
  dx_ = (x1_ - x0_) / static_cast<double>(n - 1);
  // Solve the tridiagonal system for second derivatives with not-a-knot
  // end conditions (third derivative continuous across the first and last
  // interior nodes).
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
  const double h = dx_;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    a[i] = h;
    b[i] = 4.0 * h;
    c[i] = h;
    d[i] = 6.0 * ((y_[i + 1] - y_[i]) / h - (y_[i] - y_[i - 1]) / h);
  }
  // not-a-knot: m0 - 2 m1 + m2 = 0 and m_{n-3} - 2 m_{n-2} + m_{n-1} = 0
  b[0] = 1.0;
  c[0] = -2.0;
  d[0] = 0.0;
  a[0] = 0.0;
  // fold m2 into the first equation via elimination below; use an extended
  // band by absorbing the m2 coefficient with row operations.
  // Simplest: express m0 = 2 m1 - m2 and substitute into the i=1 equation.
  // Row i=1: a1 m0 + b1 m1 + c1 m2 = d1 -> (b1 + 2 a1) m1 + (c1 - a1) m2 = d1.
  b[1] += 2.0 * a[1];
  c[1] -= a[1];
  a[1] = 0.0;
  // Similarly m_{n-1} = 2 m_{n-2} - m_{n-3} into row i=n-2.
  b[n - 2] += 2.0 * c[n - 2];
  a[n - 2] -= c[n - 2];
  c[n - 2] = 0.0;
  // Thomas algorithm on rows 1..n-2.
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  m_[n - 2] = d[n - 2] / b[n - 2];
  for (std::size_t i = n - 3; i >= 1; --i) {
    m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
    if (i == 1) break;
  }
  m_[0] = 2.0 * m_[1] - m_[2];
  m_[n - 1] = 2.0 * m_[n - 2] - m_[n - 3];
}

double CubicSplineTable::operator()(double x) const {
  const std::size_t n = y_.size();
  if (n == 0) return 0.0;
  if (n < 4 || x <= x0_) return y_.front();
  if (x >= x1_) return y_.back();
  const double p = (x - x0_) / dx_;
  std::size_t i = static_cast<std::size_t>(p);
  if (i >= n - 1) i = n - 2;
  const double t = (x - (x0_ + static_cast<double>(i) * dx_)) / dx_;
  const double h2 = dx_ * dx_;
  const double s = 1.0 - t;
  return s * y_[i] + t * y_[i + 1] +
         h2 / 6.0 * ((s * s * s - s) * m_[i] + (t * t * t - t) * m_[i + 1]);
}

double PchipTable::operator()(double x) const {
  const std::size_t n = y_.size();
  if (n == 0) return 0.0;
  if (n == 1 || x <= x0_) return y_.front();
  if (x >= x1_) return y_.back();
  const double p = (x - x0_) / dx_;
  std::size_t i = static_cast<std::size_t>(p);
  if (i >= n - 1) i = n - 2;
  const double t = p - static_cast<double>(i);
  const double h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
  const double h10 = t * (1.0 - t) * (1.0 - t);
  const double h01 = t * t * (3.0 - 2.0 * t);
  const double h11 = t * t * (t - 1.0);
  return h00 * y_[i] + h10 * dx_ * slope_[i] + h01 * y_[i + 1] +
         h11 * dx_ * slope_[i + 1];
}

}  // namespace gmc
