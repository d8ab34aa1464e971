#include "gmc/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <ostream>

#include "gmc/errors.hpp"
#include "gmc/quadrature.hpp"

namespace gmc {
namespace {

constexpr double kQuadTol = 1e-13;

// Generating bump psi, radius 1/2, C^inf, radial.
double psi(double r) {
  const double u = 2.0 * r;
  if (u >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

// (psi * psi)(r e1) in one dimension.
double self_convolution_1d(double r) {
  const double lo = std::max(-0.5, r - 0.5);
  const double hi = std::min(0.5, r + 0.5);
  if (hi <= lo) return 0.0;
  return integrate([r](double y) { return psi(std::abs(y)) * psi(std::abs(r - y)); },
                   lo, hi, 1e-14);
}

// Gauss-Legendre nodes/weights on [-1/2, 1/2], computed once.
struct GlGrid {
  std::vector<double> x, w;
};
GlGrid gl_grid(int n) {
  GlGrid g;
  g.x.resize(n);
  g.w.resize(n);
  // Newton iteration on Legendre polynomials.
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    g.x[i] = 0.5 * x;
    g.w[i] = 0.5 * 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return g;
}

// (psi * psi)(r e1) in two dimensions, tensor Gauss-Legendre over the
// support square of psi. The integrand is C^inf with compact support, so
// the fixed grid converges well below the table's interpolation error.
struct SelfConv2d {
  GlGrid g = gl_grid(220);
  std::vector<double> psi_grid;
  SelfConv2d() {
    const int n = static_cast<int>(g.x.size());
    psi_grid.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        psi_grid[static_cast<std::size_t>(i) * n + j] =
            psi(std::hypot(g.x[i], g.x[j])) * g.w[i] * g.w[j];
  }
  double operator()(double r) const {
    const int n = static_cast<int>(g.x.size());
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dx = r - g.x[i];
      for (int j = 0; j < n; ++j) {
        const double v = psi_grid[static_cast<std::size_t>(i) * n + j];
        if (v != 0.0) sum += v * psi(std::hypot(dx, g.x[j]));
      }
    }
    return sum;
  }
};

}  // namespace

void StarScaleParams::validate() const {
  if (!(eta1 >= 0.0 && eta1 <= 1.0))
    throw ValidationError("kernel: eta1 must lie in [0,1]");
  if (!(eta2 > 0.0)) throw ValidationError("kernel: eta2 must be positive");
  if (dim != 1 && dim != 2) throw ValidationError("kernel: dim must be 1 or 2");
  if (!(k0_constant >= 0.0))
    throw ValidationError("kernel: k0_constant must be nonnegative");
}

BumpProfile::BumpProfile(int dim, std::size_t resolution) : dim_(dim) {
  inner_profile_ = "exp(-1/(1-(2r)^2)) on r<1/2, radial";
  std::vector<double> values(resolution);
  if (dim == 1) {
    const double norm = self_convolution_1d(0.0);
    for (std::size_t i = 0; i < resolution; ++i) {
      const double r = static_cast<double>(i) / static_cast<double>(resolution - 1);
      values[i] = self_convolution_1d(r) / norm;
    }
  } else {
    SelfConv2d conv;
    const double norm = conv(0.0);
    for (std::size_t i = 0; i < resolution; ++i) {
      const double r = static_cast<double>(i) / static_cast<double>(resolution - 1);
      values[i] = conv(r) / norm;
    }
  }
  values.front() = 1.0;  // exact by normalization
  values.back() = 0.0;   // support boundary
  for (double& v : values) v = std::clamp(v, 0.0, 1.0);
  table_ = CubicSplineTable(0.0, 1.0, std::move(values));
}

const BumpProfile& BumpProfile::standard(int dim) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<BumpProfile>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(dim);
  if (it == cache.end()) {
    it = cache.emplace(dim, std::unique_ptr<BumpProfile>(new BumpProfile(dim, 8192))).first;
  }
  return *it->second;
}

double BumpProfile::operator()(double r) const {
  if (r <= 0.0) return 1.0;
  if (r >= 1.0) return 0.0;
  return std::clamp(table_(r), 0.0, 1.0);
}

double kappa(double r, const BumpProfile& profile) { return profile(r); }

double solve_scale_time(double t, const StarScaleParams& params) {
  if (!(t >= 0.0)) throw ValidationError("solve_scale_time: t must be nonnegative");
  if (t == 0.0 || params.eta1 == 0.0) return t;  // identity map / fixed point
  const double ratio = params.eta1 / params.eta2;
  double lo = t, hi = t + ratio;
  auto f = [&](double tp) {
    return tp - ratio * (1.0 - std::exp(-params.eta2 * tp)) - t;
  };
  // f(lo) <= 0 <= f(hi); the map is strictly increasing.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * (1.0 + t)) break;
  }
  return 0.5 * (lo + hi);
}

double slab_covariance(double s0, double s1, double r, const StarScaleParams& params,
                       const BumpProfile& profile) {
  if (s1 < s0) throw ValidationError("slab_covariance: requires s0 <= s1");
  if (!(s0 >= 0.0)) throw ValidationError("slab_covariance: requires s0 >= 0");
  if (s1 == s0) return 0.0;
  if (r <= 0.0) return s1 - s0;  // kappa(0) = 1 integrates exactly
  const double s0p = solve_scale_time(s0, params);
  const double s1p = solve_scale_time(s1, params);
  const double upper = std::min(s1p, std::log(1.0 / r));
  if (upper <= s0p) return 0.0;  // integrand support is empty
  const double eta1 = params.eta1, eta2 = params.eta2;
  return integrate(
      [&](double s) {
        return (1.0 - eta1 * std::exp(-eta2 * s)) * profile(std::exp(s) * r);
      },
      s0p, upper, kQuadTol);
}

double k_t_value(double t, double r, const StarScaleParams& params,
                 const BumpProfile& profile) {
  if (!(t >= 0.0)) throw ValidationError("k_t_value: t must be nonnegative");
  return params.k0_constant + slab_covariance(0.0, t, r, params, profile);
}

double CovarianceTable::operator()(double r) const {
  double v = (r >= support) ? 0.0 : radial(r);
  if (kind == CovKind::kKT) v += k0;
  return v;
}

void CovarianceTable::dump_csv(std::ostream& os) const {
  os << "r,value\n";
  const std::size_t n = radial.size();
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    const double r =
        radial.x0() + (radial.x1() - radial.x0()) * static_cast<double>(i) /
                          static_cast<double>(n - 1);
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r, (*this)(r));
    os << buf;
  }
}

CovarianceTable build_slab_table(double s0, double s1, const StarScaleParams& params,
                                 const BumpProfile& profile, std::size_t resolution) {
  CovarianceTable tab;
  tab.kind = CovKind::kSlab;
  tab.s0 = s0;
  tab.s1 = s1;
  tab.support = std::exp(-solve_scale_time(s0, params));
  tab.quadrature_tol = 1e-10;
  std::vector<double> values(resolution);
  for (std::size_t i = 0; i < resolution; ++i) {
    const double r = tab.support * static_cast<double>(i) / static_cast<double>(resolution - 1);
    values[i] = slab_covariance(s0, s1, r, params, profile);
  }
  values.front() = s1 - s0;  // Kbar_t(x,x) = t, pinned
  values.back() = 0.0;
  tab.radial = PchipTable(0.0, tab.support, std::move(values));
  return tab;
}

CovarianceTable build_kbar_table(double t, const StarScaleParams& params,
                                 const BumpProfile& profile, std::size_t resolution) {
  CovarianceTable tab = build_slab_table(0.0, t, params, profile, resolution);
  tab.kind = CovKind::kKbarT;
  tab.t = t;
  return tab;
}

CovarianceTable build_kt_table(double t, const StarScaleParams& params,
                               const BumpProfile& profile, std::size_t resolution) {
  CovarianceTable tab = build_slab_table(0.0, t, params, profile, resolution);
  tab.kind = CovKind::kKT;
  tab.t = t;
  tab.k0 = params.k0_constant;
  return tab;
}

double theta_unnormalized(ThetaKind kind, double r) {
  if (r >= 1.0) return 0.0;
  const double c = (kind == ThetaKind::kStandard) ? 1.0 : 3.0;
  return std::exp(-c / (1.0 - r * r));
}

ThetaWeights1d theta_lattice_weights_1d(ThetaKind kind, double eps, double h) {
  if (!(eps > 0.0)) throw ValidationError("mollifier: eps must be positive");
  ThetaWeights1d tw;
  tw.m = static_cast<int>(std::ceil(eps / h)) - 1;
  tw.m = std::max(tw.m, 0);
  tw.w.assign(2 * tw.m + 1, 0.0);
  double sum = 0.0;
  for (int j = -tw.m; j <= tw.m; ++j) {
    const double v = theta_unnormalized(kind, std::abs(j) * h / eps);
    tw.w[tw.m + j] = v;
    sum += v;
  }
  if (sum <= 0.0) throw ValidationError("mollifier: empty lattice support");
  for (double& v : tw.w) v /= sum;
  return tw;
}

ThetaWeights2d theta_lattice_weights_2d(ThetaKind kind, double eps, double h) {
  if (!(eps > 0.0)) throw ValidationError("mollifier: eps must be positive");
  ThetaWeights2d tw;
  const int m = std::max(static_cast<int>(std::ceil(eps / h)) - 1, 0);
  double sum = 0.0;
  for (int j1 = -m; j1 <= m; ++j1) {
    for (int j2 = -m; j2 <= m; ++j2) {
      const double v = theta_unnormalized(kind, std::hypot(j1, j2) * h / eps);
      if (v > 0.0) {
        tw.j1.push_back(j1);
        tw.j2.push_back(j2);
        tw.w.push_back(v);
        sum += v;
      }
    }
  }
  if (sum <= 0.0) throw ValidationError("mollifier: empty lattice support");
  for (double& v : tw.w) v /= sum;
  return tw;
}

namespace {
// Shared cache of Kbar tables; queries at many (eps, r) for the same t are
// common in envelope scans.
const CovarianceTable& cached_kbar(double t, const StarScaleParams& params,
                                   const BumpProfile& profile) {
  static std::mutex mu;
  static std::map<std::tuple<double, double, double, int>,
                  std::unique_ptr<CovarianceTable>>
      cache;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_tuple(t, params.eta1, params.eta2, params.dim);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache
             .emplace(key, std::make_unique<CovarianceTable>(
                               build_kbar_table(t, params, profile)))
             .first;
  }
  return *it->second;
}
}  // namespace

double mollified_covariance(double t, double eps, double r, CovKind kind,
                            ThetaKind theta, const StarScaleParams& params,
                            const BumpProfile& profile, double h) {
  if (!(eps > 0.0 && eps <= 1.0))
    throw ValidationError("mollified_covariance: eps must lie in (0,1]");
  if (t < 0.0) t = std::log(1.0 / eps) + 4.0;  // infinite-scale stand-in
  const CovarianceTable& kbar = cached_kbar(t, params, profile);
  auto kbar_at = [&](double rr) { return kbar(std::abs(rr)); };

  if (params.dim == 1) {
    const ThetaWeights1d tw = theta_lattice_weights_1d(theta, eps, h);
    if (kind == CovKind::kKbarCross) {
      double sum = 0.0;
      for (int j = -tw.m; j <= tw.m; ++j) sum += tw.w[tw.m + j] * kbar_at(r - j * h);
      return sum;
    }
    // Double convolution depends on the weight autocorrelation only.
    std::vector<double> auto_w(4 * tw.m + 1, 0.0);
    for (int a = -tw.m; a <= tw.m; ++a)
      for (int b = -tw.m; b <= tw.m; ++b)
        auto_w[2 * tw.m + (a - b)] += tw.w[tw.m + a] * tw.w[tw.m + b];
    double sum = 0.0;
    for (int m2 = -2 * tw.m; m2 <= 2 * tw.m; ++m2)
      sum += auto_w[2 * tw.m + m2] * kbar_at(r + m2 * h);
    return params.k0_constant + sum;
  }

  const ThetaWeights2d tw = theta_lattice_weights_2d(theta, eps, h);
  if (kind == CovKind::kKbarCross) {
    double sum = 0.0;
    for (std::size_t i = 0; i < tw.w.size(); ++i)
      sum += tw.w[i] * kbar_at(std::hypot(r - tw.j1[i] * h, tw.j2[i] * h));
    return sum;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < tw.w.size(); ++i)
    for (std::size_t j = 0; j < tw.w.size(); ++j)
      sum += tw.w[i] * tw.w[j] *
             kbar_at(std::hypot(r - (tw.j1[i] - tw.j1[j]) * h,
                                (tw.j2[i] - tw.j2[j]) * h));
  return params.k0_constant + sum;
}

bool steak_bound_holds(const CovarianceTable& kbar_table) {
  const std::size_t n = kbar_table.radial.size();
  const double t = kbar_table.s1 - kbar_table.s0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = kbar_table.radial.x1() * static_cast<double>(i) /
                     static_cast<double>(n - 1);
    const double bound = std::min(t, r > 0.0 ? std::max(std::log(1.0 / r), 0.0)
                                             : t);
    if (kbar_table.radial.values()[i] > bound) return false;
  }
  return true;
}

double log_bound_deviation(double t, double eps, const std::vector<double>& radii,
                           const std::vector<double>& values) {
  double worst = 0.0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double re = std::max(radii[i], eps);
    const double target = std::min(t, re < 1.0 ? std::log(1.0 / re) : 0.0);
    worst = std::max(worst, std::abs(values[i] - target));
  }
  return worst;
}

std::vector<double> lattice_kbar_sequence(double t, std::size_t n, double h,
                                          const StarScaleParams& params,
                                          const BumpProfile& profile) {
  std::vector<double> c(n, 0.0);
  const CovarianceTable kbar = build_kbar_table(t, params, profile);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t jm = std::min(j, n - j);
    c[j] = kbar(static_cast<double>(jm) * h);
  }
  return c;
}

}  // namespace gmc
