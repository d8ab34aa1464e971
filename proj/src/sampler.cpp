#include "gmc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gmc/errors.hpp"
#include "gmc/quadrature.hpp"

namespace gmc {
namespace {

double theta_norm_constant(ThetaKind kind, int dim) {
  if (dim == 1) {
    return 2.0 * integrate([&](double r) { return theta_unnormalized(kind, r); },
                           0.0, 1.0, 1e-12);
  }
  return 2.0 * M_PI *
         integrate([&](double r) { return r * theta_unnormalized(kind, r); }, 0.0,
                   1.0, 1e-12);
}

double theta_l2_constant(ThetaKind kind, int dim) {
  const double c = theta_norm_constant(kind, dim);
  if (dim == 1) {
    return 2.0 *
           integrate(
               [&](double r) {
                 const double v = theta_unnormalized(kind, r);
                 return v * v;
               },
               0.0, 1.0, 1e-12) /
           (c * c);
  }
  return 2.0 * M_PI *
         integrate(
             [&](double r) {
               const double v = theta_unnormalized(kind, r);
               return r * v * v;
             },
             0.0, 1.0, 1e-12) /
         (c * c);
}

}  // namespace

double bridge_max_sample(double a, double b, double dt, double u01) {
  // P(max <= m) = 1 - exp(-2 (m-a)(m-b)/dt) inverted at u01.
  const double d = a - b;
  const double disc = d * d - 2.0 * dt * std::log1p(-u01);
  return 0.5 * ((a + b) + std::sqrt(std::max(disc, 0.0)));
}

WorkerContext::WorkerContext(const GridSpec& grid)
    : fft_(std::make_unique<RealFft>(grid.dim, grid.points_per_side)) {
  cumulative.resize(grid.total_points());
  barrier.resize(grid.total_points());
  scratch.resize(grid.total_points());
}

FieldSampler::FieldSampler(const GridSpec& grid, const ScaleSchedule& schedule,
                           const StarScaleParams& params, Options options)
    : grid_(grid),
      schedule_(schedule),
      params_(params),
      profile_(&BumpProfile::standard(params.dim)),
      options_(options) {
  grid_.validate();
  params_.validate();
  schedule_.validate();
  if (grid_.dim != params_.dim)
    throw ValidationError("sampler: grid and kernel dimension disagree");
  check_resolvable(grid_, schedule_);
  slabs_.resize(schedule_.slab_count());
  spectral_floor_ = 0.0;
  for (std::size_t i = 0; i < slabs_.size(); ++i) build_slab(i);
}

void FieldSampler::build_slab(std::size_t index) {
  Slab& slab = slabs_[index];
  slab.s0 = schedule_.levels[index];
  slab.s1 = schedule_.levels[index + 1];
  const std::size_t n = grid_.points_per_side;
  const double h = grid_.spacing();
  // The spectrum check tolerates only ~1e-9 relative negativity, so the
  // lattice covariances come from direct quadrature rather than through an
  // interpolated table.
  const double support = std::exp(-solve_scale_time(slab.s0, params_));

  std::vector<double> lambda;
  if (grid_.dim == 1) {
    slab.cov.assign(n, 0.0);
    for (std::size_t j = 0; j <= n / 2; ++j) {
      const double r = static_cast<double>(j) * h;
      if (r >= support && j > 0) break;
      slab.cov[j] = slab_covariance(slab.s0, slab.s1, r, params_, *profile_);
      if (j > 0) slab.cov[n - j] = slab.cov[j];
    }
    lambda = circulant_spectrum_1d(slab.cov);
  } else {
    // Radial spline at quadrature accuracy, then evaluated on the grid.
    const std::size_t res = options_.table_resolution;
    std::vector<double> radial(res);
    for (std::size_t i = 0; i < res; ++i) {
      const double r = support * static_cast<double>(i) / static_cast<double>(res - 1);
      radial[i] = slab_covariance(slab.s0, slab.s1, r, params_, *profile_);
    }
    radial.front() = slab.s1 - slab.s0;
    radial.back() = 0.0;
    const CubicSplineTable table(0.0, support, std::move(radial));
    slab.cov.assign(n * n, 0.0);
    for (std::size_t j0 = 0; j0 < n; ++j0) {
      const double d0 = static_cast<double>(std::min(j0, n - j0)) * h;
      for (std::size_t j1 = 0; j1 < n; ++j1) {
        const double d1 = static_cast<double>(std::min(j1, n - j1)) * h;
        const double r = std::hypot(d0, d1);
        slab.cov[j0 * n + j1] = r >= support ? 0.0 : table(r);
      }
    }
    lambda = circulant_spectrum_2d(slab.cov, n);
  }

  const double lam_max = *std::max_element(lambda.begin(), lambda.end());
  const double lam_min = *std::min_element(lambda.begin(), lambda.end());
  if (lam_max > 0.0)
    spectral_floor_ = std::min(spectral_floor_, lam_min / lam_max);
  if (lam_min < -1e-9 * lam_max) {
    char msg[128];
    std::snprintf(msg, sizeof(msg),
                  "NegativeSpectrum: slab [%g,%g] eigenvalue %.3e (max %.3e)",
                  slab.s0, slab.s1, lam_min, lam_max);
    throw NumericalError(msg);
  }
  const std::size_t total = grid_.total_points();
  const bool mildly_negative = lam_min < -1e-10 * lam_max;
  if ((mildly_negative || options_.force_dense) && total <= 4096) {
    // Meaningfully negative but within tolerance: dense factorization with
    // diagonal jitter instead of the spectral route.
    std::vector<double> m(total * total);
    for (std::size_t i = 0; i < total; ++i) {
      for (std::size_t j = 0; j < total; ++j) {
        std::size_t lag;
        if (grid_.dim == 1) {
          lag = (i + total - j) % total;
        } else {
          const std::size_t l0 = (i / n + n - j / n) % n;
          const std::size_t l1 = (i % n + n - j % n) % n;
          lag = l0 * n + l1;
        }
        m[i * total + j] = slab.cov[lag];
      }
      m[i * total + i] += 1e-12;
    }
    // In-place Cholesky.
    for (std::size_t c = 0; c < total; ++c) {
      double diag = m[c * total + c];
      for (std::size_t k = 0; k < c; ++k) diag -= m[c * total + k] * m[c * total + k];
      if (diag <= 0.0) throw NumericalError("NegativeSpectrum: dense factorization failed");
      diag = std::sqrt(diag);
      m[c * total + c] = diag;
      for (std::size_t r = c + 1; r < total; ++r) {
        double v = m[r * total + c];
        for (std::size_t k = 0; k < c; ++k) v -= m[r * total + k] * m[c * total + k];
        m[r * total + c] = v / diag;
      }
    }
    slab.dense_factor.assign(total * total, 0.0);
    for (std::size_t r = 0; r < total; ++r)
      for (std::size_t c = 0; c <= r; ++c)
        slab.dense_factor[r * total + c] = m[r * total + c];
    return;
  }

  for (double& l : lambda) l = std::max(l, 0.0);  // roundoff floor
  const double nt = static_cast<double>(total);
  if (grid_.dim == 1) {
    slab.amp_full = {std::sqrt(lambda[0] / nt), std::sqrt(lambda[n / 2] / nt)};
    slab.amp_half.assign(n / 2 + 1, 0.0);
    for (std::size_t k = 1; k < n / 2; ++k)
      slab.amp_half[k] = std::sqrt(lambda[k] / (2.0 * nt));
  } else {
    const std::size_t nc = n / 2 + 1;
    slab.amp_half.assign(n * nc, 0.0);
    for (std::size_t k0 = 0; k0 < n; ++k0)
      for (std::size_t k1 = 0; k1 < nc; ++k1)
        slab.amp_half[k0 * nc + k1] = std::sqrt(lambda[k0 * n + k1] / (2.0 * nt));
  }
}

void FieldSampler::sample_slab_1d(const Slab& slab, RngStream& rng,
                                  WorkerContext& ctx) const {
  const std::size_t n = grid_.points_per_side;
  if (!slab.dense_factor.empty()) {
    std::vector<double> g(n);
    for (double& x : g) x = rng.gaussian();
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      const double* row = &slab.dense_factor[r * n];
      for (std::size_t c = 0; c <= r; ++c) acc += row[c] * g[c];
      ctx.fft().real_buf()[r] = acc;
    }
    return;
  }
  std::complex<double>* h = ctx.fft().complex_buf();
  h[0] = {slab.amp_full[0] * rng.gaussian(), 0.0};
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double a = rng.gaussian();
    const double b = rng.gaussian();
    h[k] = {slab.amp_half[k] * a, slab.amp_half[k] * b};
  }
  h[n / 2] = {slab.amp_full[1] * rng.gaussian(), 0.0};
  ctx.fft().inverse();
}

void FieldSampler::sample_slab_2d(const Slab& slab, RngStream& rng,
                                  WorkerContext& ctx) const {
  const std::size_t n = grid_.points_per_side;
  const std::size_t nc = n / 2 + 1;
  if (!slab.dense_factor.empty()) {
    const std::size_t total = n * n;
    std::vector<double> g(total);
    for (double& x : g) x = rng.gaussian();
    for (std::size_t r = 0; r < total; ++r) {
      double acc = 0.0;
      const double* row = &slab.dense_factor[r * total];
      for (std::size_t c = 0; c <= r; ++c) acc += row[c] * g[c];
      ctx.fft().real_buf()[r] = acc;
    }
    return;
  }
  std::complex<double>* h = ctx.fft().complex_buf();
  const double sqrt2 = std::sqrt(2.0);
  for (std::size_t k0 = 0; k0 < n; ++k0) {
    for (std::size_t k1 = 0; k1 < nc; ++k1) {
      const double amp = slab.amp_half[k0 * nc + k1];
      const bool edge = (k1 == 0 || k1 == n / 2);
      if (!edge) {
        h[k0 * nc + k1] = {amp * rng.gaussian(), amp * rng.gaussian()};
        continue;
      }
      if (k0 == 0 || k0 == n / 2) {
        h[k0 * nc + k1] = {sqrt2 * amp * rng.gaussian(), 0.0};
      } else if (k0 < n / 2) {
        h[k0 * nc + k1] = {amp * rng.gaussian(), amp * rng.gaussian()};
      } else {
        h[k0 * nc + k1] = std::conj(h[(n - k0) * nc + k1]);
      }
    }
  }
  ctx.fft().inverse();
}

void FieldSampler::run_replicate(std::uint64_t master_seed, std::uint64_t replicate,
                                 ReplicateVisitor& visitor, WorkerContext& ctx) const {
  RngStream rng(master_seed, replicate);
  const std::size_t total = grid_.total_points();
  std::fill(ctx.cumulative.begin(), ctx.cumulative.end(), 0.0);
  std::fill(ctx.barrier.begin(), ctx.barrier.end(), 0.0);
  double x0 = 0.0;
  if (params_.k0_constant > 0.0) x0 = std::sqrt(params_.k0_constant) * rng.gaussian();

  const double drift = std::sqrt(2.0 * static_cast<double>(grid_.dim));
  std::size_t next_snapshot = 0;

  for (std::size_t i = 0; i < slabs_.size(); ++i) {
    const Slab& slab = slabs_[i];
    if (grid_.dim == 1)
      sample_slab_1d(slab, rng, ctx);
    else
      sample_slab_2d(slab, rng, ctx);
    const double* incr = ctx.fft().real_buf();
    visitor.on_slab(i, slab.s0, slab.s1, std::span<const double>(incr, total));

    const double dt = slab.s1 - slab.s0;
    if (options_.bridge_refine) {
      for (std::size_t p = 0; p < total; ++p) {
        const double a = ctx.cumulative[p] - drift * slab.s0;
        ctx.cumulative[p] += incr[p];
        const double b = ctx.cumulative[p] - drift * slab.s1;
        const double m = bridge_max_sample(a, b, dt, rng.uniform());
        if (m > ctx.barrier[p]) ctx.barrier[p] = m;
      }
    } else {
      for (std::size_t p = 0; p < total; ++p) {
        ctx.cumulative[p] += incr[p];
        const double b = ctx.cumulative[p] - drift * slab.s1;
        if (b > ctx.barrier[p]) ctx.barrier[p] = b;
      }
    }

    if (next_snapshot < schedule_.snapshots.size() &&
        std::abs(schedule_.snapshots[next_snapshot] - slab.s1) < 1e-12) {
      Snapshot snap;
      snap.t = slab.s1;
      snap.level_index = i + 1;
      snap.xbar = std::span<const double>(ctx.cumulative.data(), total);
      snap.barrier_max = std::span<const double>(ctx.barrier.data(), total);
      snap.x0 = x0;
      snap.sigma2 = slab.s1 + params_.k0_constant;
      snap.grid = &grid_;
      visitor.on_snapshot(snap);
      ++next_snapshot;
    }
  }
}

double FieldSampler::lattice_cov(double t, std::size_t lag_cells) const {
  double acc = 0.0;
  for (const Slab& slab : slabs_) {
    if (slab.s1 > t + 1e-12) break;
    if (grid_.dim == 1)
      acc += slab.cov[lag_cells];
    else
      acc += slab.cov[lag_cells * grid_.points_per_side];
  }
  return acc;
}

LatticeMollifier::LatticeMollifier(const GridSpec& grid, double eps, ThetaKind theta)
    : grid_(grid), eps_(eps), theta_(theta) {
  const double h = grid_.spacing();
  if (eps < 4.0 * h)
    throw ValidationError("UnresolvableMollifier: eps < 4*spacing");
  if (eps > 1.0) throw ValidationError("mollifier: eps must be <= 1");
  const std::size_t n = grid_.points_per_side;
  RealFft fft(grid_.dim, n);
  const std::size_t total = grid_.total_points();
  std::fill(fft.real_buf(), fft.real_buf() + total, 0.0);
  if (grid_.dim == 1) {
    const ThetaWeights1d tw = theta_lattice_weights_1d(theta, eps, h);
    for (int j = -tw.m; j <= tw.m; ++j) {
      const std::size_t idx =
          static_cast<std::size_t>((j % static_cast<long>(n) + static_cast<long>(n))) % n;
      fft.real_buf()[idx] += tw.w[tw.m + j];
      off1_.push_back(j);
      off2_.push_back(0);
      weights_.push_back(tw.w[tw.m + j]);
    }
  } else {
    const ThetaWeights2d tw = theta_lattice_weights_2d(theta, eps, h);
    const long ln = static_cast<long>(n);
    for (std::size_t i = 0; i < tw.w.size(); ++i) {
      const std::size_t a = static_cast<std::size_t>((tw.j1[i] % ln + ln) % ln);
      const std::size_t b = static_cast<std::size_t>((tw.j2[i] % ln + ln) % ln);
      fft.real_buf()[a * n + b] += tw.w[i];
      off1_.push_back(tw.j1[i]);
      off2_.push_back(tw.j2[i]);
      weights_.push_back(tw.w[i]);
    }
  }
  fft.forward();
  kernel_dft_.assign(fft.complex_buf(), fft.complex_buf() + fft.complex_size());
}

void LatticeMollifier::convolve(std::span<const double> in, std::span<double> out,
                                WorkerContext& ctx) const {
  RealFft& fft = ctx.fft();
  const std::size_t total = grid_.total_points();
  std::copy(in.begin(), in.end(), fft.real_buf());
  fft.forward();
  const double scale = 1.0 / static_cast<double>(total);
  for (std::size_t k = 0; k < fft.complex_size(); ++k)
    fft.complex_buf()[k] *= kernel_dft_[k] * scale;
  fft.inverse();
  std::copy(fft.real_buf(), fft.real_buf() + total, out.begin());
}

namespace {
inline std::size_t wrap_lag(long d, std::size_t n) {
  const long ln = static_cast<long>(n);
  return static_cast<std::size_t>((d % ln + ln) % ln);
}
}  // namespace

double LatticeMollifier::mollified_variance(const std::vector<double>& lattice_cov) const {
  const std::size_t n = grid_.points_per_side;
  double acc = 0.0;
  if (grid_.dim == 1) {
    for (std::size_t a = 0; a < weights_.size(); ++a)
      for (std::size_t b = 0; b < weights_.size(); ++b)
        acc += weights_[a] * weights_[b] *
               lattice_cov[wrap_lag(off1_[a] - off1_[b], n)];
    return acc;
  }
  for (std::size_t a = 0; a < weights_.size(); ++a)
    for (std::size_t b = 0; b < weights_.size(); ++b) {
      const std::size_t i0 = wrap_lag(off1_[a] - off1_[b], n);
      const std::size_t i1 = wrap_lag(off2_[a] - off2_[b], n);
      acc += weights_[a] * weights_[b] * lattice_cov[i0 * n + i1];
    }
  return acc;
}

double LatticeMollifier::mollified_cross_cov(const std::vector<double>& lattice_cov,
                                             long lag_cells) const {
  const std::size_t n = grid_.points_per_side;
  double acc = 0.0;
  if (grid_.dim == 1) {
    for (std::size_t a = 0; a < weights_.size(); ++a)
      acc += weights_[a] * lattice_cov[wrap_lag(lag_cells - off1_[a], n)];
    return acc;
  }
  for (std::size_t a = 0; a < weights_.size(); ++a) {
    const std::size_t i0 = wrap_lag(lag_cells - off1_[a], n);
    const std::size_t i1 = wrap_lag(-off2_[a], n);
    acc += weights_[a] * lattice_cov[i0 * n + i1];
  }
  return acc;
}

double mollified_tail_variance(double source_t, double eps, ThetaKind theta,
                               const StarScaleParams& params, const BumpProfile& profile) {
  // Var(X_eps - X_{T,eps}) = int (theta*theta)_eps(u) [Kbar_inf - Kbar_T](u) du.
  // The tail kernel is supported on |u| < e^(-T'), far below eps, so the
  // weight autocorrelation is taken at 0.
  const double tp = solve_scale_time(source_t, params);
  const double radius = std::exp(-tp);
  const double a0 = theta_l2_constant(theta, params.dim);
  auto tail = [&](double r) {
    const double upper = std::log(1.0 / r);
    if (upper <= tp) return 0.0;
    return integrate(
        [&](double s) {
          return (1.0 - params.eta1 * std::exp(-params.eta2 * s)) *
                 profile(std::exp(s) * r);
        },
        tp, upper, 1e-13);
  };
  if (params.dim == 1) {
    const double integral =
        integrate([&](double r) { return tail(r); }, 0.0, radius, 1e-13);
    return 2.0 * (a0 / eps) * integral;
  }
  const double integral = integrate(
      [&](double r) { return 2.0 * M_PI * r * tail(r); }, 0.0, radius, 1e-14);
  return (a0 / (eps * eps)) * integral;
}

MollifiedField mollify_field(const Snapshot& snap, double eps, ThetaKind theta,
                             const LatticeMollifier& mollifier, WorkerContext& ctx) {
  if (std::abs(mollifier.eps() - eps) > 1e-15)
    throw ValidationError("mollify_field: mollifier built for a different eps");
  if (snap.t + 1e-9 < mollify_stand_in_t(eps))
    throw ValidationError("mollify_field: snapshot level below log(1/eps)+4");
  MollifiedField out;
  out.eps = eps;
  out.source_t = snap.t;
  out.values.resize(snap.xbar.size());
  mollifier.convolve(snap.xbar, out.values, ctx);
  if (snap.x0 != 0.0)
    for (double& v : out.values) v += snap.x0;
  return out;
}

}  // namespace gmc
