#include "gmc/stats.hpp"

#include <algorithm>

namespace gmc {

MeanSe mean_se(std::span<const double> xs) {
  MeanSe r;
  r.n = xs.size();
  if (r.n == 0) return r;
  KahanSum s;
  for (double x : xs) s.add(x);
  r.mean = s.value() / static_cast<double>(r.n);
  if (r.n < 2) return r;
  KahanSum sq;
  for (double x : xs) {
    const double d = x - r.mean;
    sq.add(d * d);
  }
  const double var = sq.value() / static_cast<double>(r.n - 1);
  r.sd = std::sqrt(std::max(var, 0.0));
  r.se = r.sd / std::sqrt(static_cast<double>(r.n));
  return r;
}

double sample_cov(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  if (n < 2 || ys.size() != n) return 0.0;
  const double mx = mean_se(xs).mean;
  const double my = mean_se(ys).mean;
  KahanSum s;
  for (std::size_t i = 0; i < n; ++i) s.add((xs[i] - mx) * (ys[i] - my));
  return s.value() / static_cast<double>(n - 1);
}

double gaussian_cov_se(double cxx, double cyy, double cxy, std::size_t n) {
  if (n < 2) return 0.0;
  return std::sqrt(std::max(cxx * cyy + cxy * cxy, 0.0) / static_cast<double>(n - 1));
}

double sample_corr(std::span<const double> xs, std::span<const double> ys) {
  const double cxy = sample_cov(xs, ys);
  const double sx = mean_se(xs).sd;
  const double sy = mean_se(ys).sd;
  if (sx == 0.0 || sy == 0.0) return 0.0;
  return cxy / (sx * sy);
}

double ks_statistic(std::vector<double> sample, double (*cdf)(double, const void*),
                    const void* ctx) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i], ctx);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::abs(f - lo), std::abs(hi - f)));
  }
  return d;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace gmc
