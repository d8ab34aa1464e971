#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace gmc {

// Thin RAII wrapper over FFTW double-precision transforms for the lattice
// shapes used here: 1-d length n or 2-d n x n, real <-> halfcomplex.
// Plan creation is serialized internally (FFTW requirement); execution on
// the object's own buffers is safe from the owning thread.
class RealFft {
 public:
  // dim 1: n total points. dim 2: n x n points.
  RealFft(int dim, std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t real_size() const { return real_size_; }
  std::size_t complex_size() const { return complex_size_; }

  double* real_buf() { return real_; }
  std::complex<double>* complex_buf() { return complex_; }

  // real_buf -> complex_buf, unnormalized forward DFT.
  void forward();
  // complex_buf -> real_buf, unnormalized inverse; clobbers complex_buf.
  void inverse();

 private:
  int dim_;
  std::size_t n_;
  std::size_t real_size_;
  std::size_t complex_size_;
  double* real_ = nullptr;
  std::complex<double>* complex_ = nullptr;
  void* plan_fwd_ = nullptr;
  void* plan_inv_ = nullptr;
};

// DFT of a real even (radial) sequence: spectrum of the periodized
// covariance. Returns all n (or n*n) eigenvalues, real parts only.
std::vector<double> circulant_spectrum_1d(const std::vector<double>& cov);
std::vector<double> circulant_spectrum_2d(const std::vector<double>& cov, std::size_t n);

}  // namespace gmc
