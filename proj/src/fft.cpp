#include "gmc/fft.hpp"

#include <fftw3.h>

#include <mutex>

namespace gmc {
namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(int dim, std::size_t n) : dim_(dim), n_(n) {
  if (dim_ == 1) {
    real_size_ = n_;
    complex_size_ = n_ / 2 + 1;
  } else {
    real_size_ = n_ * n_;
    complex_size_ = n_ * (n_ / 2 + 1);
  }
  real_ = fftw_alloc_real(real_size_);
  complex_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(complex_size_));
  std::lock_guard<std::mutex> lock(plan_mutex());
  const int ni = static_cast<int>(n_);
  if (dim_ == 1) {
    plan_fwd_ = fftw_plan_dft_r2c_1d(ni, real_, reinterpret_cast<fftw_complex*>(complex_),
                                     FFTW_ESTIMATE);
    plan_inv_ = fftw_plan_dft_c2r_1d(ni, reinterpret_cast<fftw_complex*>(complex_), real_,
                                     FFTW_ESTIMATE);
  } else {
    plan_fwd_ = fftw_plan_dft_r2c_2d(ni, ni, real_, reinterpret_cast<fftw_complex*>(complex_),
                                     FFTW_ESTIMATE);
    plan_inv_ = fftw_plan_dft_c2r_2d(ni, ni, reinterpret_cast<fftw_complex*>(complex_), real_,
                                     FFTW_ESTIMATE);
  }
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
  fftw_free(real_);
  fftw_free(complex_);
}

void RealFft::forward() { fftw_execute(static_cast<fftw_plan>(plan_fwd_)); }
void RealFft::inverse() { fftw_execute(static_cast<fftw_plan>(plan_inv_)); }

std::vector<double> circulant_spectrum_1d(const std::vector<double>& cov) {
  const std::size_t n = cov.size();
  RealFft fft(1, n);
  for (std::size_t i = 0; i < n; ++i) fft.real_buf()[i] = cov[i];
  fft.forward();
  std::vector<double> lambda(n);
  // Real even input: spectrum is real and symmetric.
  for (std::size_t k = 0; k <= n / 2; ++k) lambda[k] = fft.complex_buf()[k].real();
  for (std::size_t k = n / 2 + 1; k < n; ++k) lambda[k] = lambda[n - k];
  return lambda;
}

std::vector<double> circulant_spectrum_2d(const std::vector<double>& cov, std::size_t n) {
  RealFft fft(2, n);
  for (std::size_t i = 0; i < n * n; ++i) fft.real_buf()[i] = cov[i];
  fft.forward();
  std::vector<double> lambda(n * n);
  const std::size_t nc = n / 2 + 1;
  for (std::size_t k0 = 0; k0 < n; ++k0) {
    for (std::size_t k1 = 0; k1 < n; ++k1) {
      const std::size_t k1m = (k1 < nc) ? k1 : n - k1;
      const std::size_t k0m = (k1 < nc) ? k0 : (n - k0) % n;
      lambda[k0 * n + k1] = fft.complex_buf()[k0m * nc + k1m].real();
    }
  }
  return lambda;
}

}  // namespace gmc
