#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "gmc/fft.hpp"
#include "gmc/grid.hpp"
#include "gmc/kernel.hpp"
#include "gmc/rng.hpp"

namespace gmc {

// View of the multi-scale field at a snapshot level. xbar excludes the
// global K0 mode; x0 carries it. barrier_max[i] is the running maximum of
// xbar_s(i) - sqrt(2d) s over s <= t (bridge-refined when enabled).
struct Snapshot {
  double t = 0.0;
  std::size_t level_index = 0;
  std::span<const double> xbar;
  std::span<const double> barrier_max;
  double x0 = 0.0;
  double sigma2 = 0.0;  // per-point variance of xbar + k0 (equals t + k0)
  const GridSpec* grid = nullptr;
};

// Per-replicate callbacks. on_slab sees every sampled increment in schedule
// order; on_snapshot fires at each requested snapshot level.
struct ReplicateVisitor {
  virtual ~ReplicateVisitor() = default;
  virtual void on_slab(std::size_t /*slab_index*/, double /*s0*/, double /*s1*/,
                       std::span<const double> /*increment*/) {}
  virtual void on_snapshot(const Snapshot&) {}
};

// Exact sample of the maximum of a Brownian bridge of length dt between
// endpoint values a and b, by inverting
//   P(max <= m) = 1 - exp(-2 (m-a)(m-b) / dt),  m >= max(a,b).
double bridge_max_sample(double a, double b, double dt, double u01);

// Per-worker scratch: FFT plans and field buffers, reused across replicates.
class WorkerContext {
 public:
  WorkerContext(const GridSpec& grid);
  RealFft& fft() { return *fft_; }
  std::vector<double> cumulative, barrier, scratch;

 private:
  std::unique_ptr<RealFft> fft_;
};

// Generates replicates of the field by summing independent Gaussian slab
// increments with exact discrete covariances (spectral synthesis on the
// torus). Immutable after construction; replicates are independent tasks.
class FieldSampler {
 public:
  struct Options {
    bool bridge_refine = true;
    std::size_t table_resolution = 4096;
    bool force_dense = false;  // exercise the dense factorization path
  };

  FieldSampler(const GridSpec& grid, const ScaleSchedule& schedule,
               const StarScaleParams& params, Options options);
  FieldSampler(const GridSpec& grid, const ScaleSchedule& schedule,
               const StarScaleParams& params)
      : FieldSampler(grid, schedule, params, Options{}) {}

  const GridSpec& grid() const { return grid_; }
  const ScaleSchedule& schedule() const { return schedule_; }
  const StarScaleParams& params() const { return params_; }
  const BumpProfile& profile() const { return *profile_; }

  // Runs one replicate through the visitor. Deterministic in
  // (master_seed, replicate) regardless of threading.
  void run_replicate(std::uint64_t master_seed, std::uint64_t replicate,
                     ReplicateVisitor& visitor, WorkerContext& ctx) const;

  // Lattice covariance of xbar_t between points at the given cell lag.
  double lattice_cov(double t, std::size_t lag_cells) const;
  // Spectral floor diagnostic: most negative eigenvalue over all slabs,
  // relative to the largest.
  double spectral_floor() const { return spectral_floor_; }

 private:
  struct Slab {
    double s0, s1;
    std::vector<double> amp_half;  // sqrt(lambda/(2 n_total)) per stored mode
    std::vector<double> amp_full;  // sqrt(lambda/n_total) at self-conjugate modes
    std::vector<double> cov;       // lattice covariance sequence (1-d lags)
    std::vector<double> dense_factor;  // lower-triangular fallback, row-major
  };

  void build_slab(std::size_t index);
  void sample_slab_1d(const Slab& slab, RngStream& rng, WorkerContext& ctx) const;
  void sample_slab_2d(const Slab& slab, RngStream& rng, WorkerContext& ctx) const;

  GridSpec grid_;
  ScaleSchedule schedule_;
  StarScaleParams params_;
  const BumpProfile* profile_;
  Options options_;
  std::vector<Slab> slabs_;
  std::vector<double> snapshot_mask_;  // level index -> snapshot flag
  double spectral_floor_ = 0.0;
};

// ---- Mollification ---------------------------------------------------

struct MollifiedField {
  double eps = 0.0;
  double source_t = 0.0;
  std::vector<double> values;
};

// Periodic convolution of a lattice field with theta_eps weights
// (renormalized to unit sum), via FFT. The kernel DFT is precomputed.
class LatticeMollifier {
 public:
  LatticeMollifier(const GridSpec& grid, double eps, ThetaKind theta);

  double eps() const { return eps_; }
  ThetaKind theta() const { return theta_; }

  void convolve(std::span<const double> in, std::span<double> out,
                WorkerContext& ctx) const;

  // Discrete variance of the mollified field given the lattice covariance
  // sequence of the input field (the self-consistency normalization).
  double mollified_variance(const std::vector<double>& lattice_cov) const;
  // Discrete cross covariance (X_eps(x), X(y)) at a given cell lag.
  double mollified_cross_cov(const std::vector<double>& lattice_cov,
                             long lag_cells) const;

 private:
  GridSpec grid_;
  double eps_;
  ThetaKind theta_;
  std::vector<std::complex<double>> kernel_dft_;
  std::vector<double> weights_;  // lattice tap weights, unit sum
  std::vector<long> off1_, off2_;  // matching cell offsets per tap
};

// Default infinite-scale stand-in for mollified fields.
inline double mollify_stand_in_t(double eps) { return std::log(1.0 / eps) + 4.0; }

// Truncation error of the stand-in: Var(X_eps - X_{T,eps}) from tables.
double mollified_tail_variance(double source_t, double eps, ThetaKind theta,
                               const StarScaleParams& params, const BumpProfile& profile);

MollifiedField mollify_field(const Snapshot& snap, double eps, ThetaKind theta,
                             const LatticeMollifier& mollifier, WorkerContext& ctx);

}  // namespace gmc
