#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace gmc {

// Kahan-compensated accumulator. Merging records in a canonical (index)
// order keeps aggregation bit-reproducible and order-independent.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;      // standard error of the mean
  double sd = 0.0;      // sample standard deviation
  std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> xs);

// Sample covariance of paired observations.
double sample_cov(std::span<const double> xs, std::span<const double> ys);

// Standard error of the sample covariance of a bivariate Gaussian pair,
// var(c_hat) ~ (cxx*cyy + cxy^2)/(n-1).
double gaussian_cov_se(double cxx, double cyy, double cxy, std::size_t n);

// Pearson correlation.
double sample_corr(std::span<const double> xs, std::span<const double> ys);

// Two-sided Kolmogorov-Smirnov statistic of a sample against a cdf.
double ks_statistic(std::vector<double> sample, double (*cdf)(double, const void*),
                    const void* ctx);

double normal_cdf(double z);

}  // namespace gmc
