#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "gmc/errors.hpp"
#include "gmc/fft.hpp"
#include "gmc/kernel.hpp"
#include "gmc/quadrature.hpp"

using namespace gmc;

namespace {

StarScaleParams params11() {
  StarScaleParams p;
  p.eta1 = 1.0;
  p.eta2 = 1.0;
  p.dim = 1;
  return p;
}

// Independent bisection oracle for the scale-time equation.
double scale_time_oracle(double t, double eta1, double eta2) {
  double lo = t, hi = t + eta1 / eta2 + 1e-9;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f = mid - eta1 / eta2 * (1.0 - std::exp(-eta2 * mid)) - t;
    (f < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Generating bump and its self-convolution, re-derived here as an oracle
// independent of the library's table construction.
double psi_oracle(double r) {
  const double u = 2.0 * r;
  if (u >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

double kappa_oracle_1d(double r) {
  auto conv = [](double x) {
    const double lo = std::max(-0.5, x - 0.5);
    const double hi = std::min(0.5, x + 0.5);
    if (hi <= lo) return 0.0;
    // composite Simpson, independent of the adaptive GK routine
    const int n = 20000;
    const double h = (hi - lo) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double y = lo + i * h;
      const double f = psi_oracle(std::abs(y)) * psi_oracle(std::abs(x - y));
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * f;
    }
    return acc * h / 3.0;
  };
  return conv(r) / conv(0.0);
}

}  // namespace

TEST_CASE("scale time map") {
  StarScaleParams p = params11();

  SUBCASE("eta1 = 0 is the identity") {
    p.eta1 = 0.0;
    CHECK(solve_scale_time(5.0, p) == 5.0);
  }
  SUBCASE("zero is a fixed point") { CHECK(solve_scale_time(0.0, p) == 0.0); }
  SUBCASE("reference value at t=1, eta1=eta2=1") {
    const double tp = solve_scale_time(1.0, p);
    CHECK(tp == doctest::Approx(1.8414056604369).epsilon(1e-12));
    CHECK(tp == doctest::Approx(scale_time_oracle(1.0, 1.0, 1.0)).epsilon(1e-11));
  }
  SUBCASE("bracket and residual over random parameters") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> ut(0.0, 20.0), u1(0.0, 1.0),
        u2(0.05, 5.0);
    for (int i = 0; i < 10000; ++i) {
      StarScaleParams q = p;
      q.eta1 = u1(gen);
      q.eta2 = u2(gen);
      const double t = ut(gen);
      const double tp = solve_scale_time(t, q);
      CHECK(tp >= t - 1e-12);
      CHECK(tp <= t + q.eta1 / q.eta2 + 1e-12);
      const double resid = tp - q.eta1 / q.eta2 * (1.0 - std::exp(-q.eta2 * tp)) - t;
      CHECK(std::abs(resid) <= 1e-12);
    }
  }
}

TEST_CASE("bump profile") {
  const BumpProfile& b = BumpProfile::standard(1);

  CHECK(kappa(0.0, b) == 1.0);
  CHECK(kappa(1.0, b) == 0.0);
  CHECK(kappa(1.3, b) == 0.0);

  SUBCASE("nonincreasing table") {
    const auto& v = b.radial_table().values();
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] <= v[i - 1] + 1e-14);
  }

  SUBCASE("regression value at r = 1/2 against convolution oracle") {
    CHECK(b(0.5) == doctest::Approx(0.2544800908).epsilon(1e-8));
    CHECK(b(0.5) == doctest::Approx(kappa_oracle_1d(0.5)).epsilon(1e-8));
    CHECK(b(0.25) == doctest::Approx(kappa_oracle_1d(0.25)).epsilon(1e-8));
  }

  SUBCASE("two dimensional profile regression") {
    const BumpProfile& b2 = BumpProfile::standard(2);
    CHECK(b2(0.5) == doctest::Approx(0.1974953500).epsilon(1e-8));
    CHECK(b2(0.0) == 1.0);
    CHECK(b2(1.0) == 0.0);
  }

  SUBCASE("positive definiteness witness: lattice DFT nonnegative") {
    const std::size_t n = 4096;
    const double h = 4.0 / n;
    std::vector<double> c(n);
    for (std::size_t j = 0; j < n; ++j) c[j] = b(std::min(j, n - j) * h);
    const auto lambda = circulant_spectrum_1d(c);
    const double mx = *std::max_element(lambda.begin(), lambda.end());
    for (double l : lambda) CHECK(l >= -1e-10 * mx);
  }

  SUBCASE("positive definiteness witness in two dimensions") {
    const BumpProfile& b2 = BumpProfile::standard(2);
    const std::size_t n = 64;
    const double h = 4.0 / n;
    std::vector<double> c(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        c[i * n + j] = b2(std::hypot(std::min(i, n - i) * h, std::min(j, n - j) * h));
    const auto lambda = circulant_spectrum_2d(c, n);
    const double mx = *std::max_element(lambda.begin(), lambda.end());
    for (double l : lambda) CHECK(l >= -1e-10 * mx);
  }
}

TEST_CASE("slab covariance") {
  const StarScaleParams p = params11();
  const BumpProfile& b = BumpProfile::standard(1);

  CHECK(slab_covariance(2.0, 3.0, 0.0, p, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(slab_covariance(2.0, 3.0, 0.2, p, b) == 0.0);  // beyond e^{-2'}
  CHECK_THROWS_AS(slab_covariance(3.0, 2.0, 0.1, p, b), ValidationError);

  SUBCASE("support radius is exact") {
    const double s0p = solve_scale_time(1.0, p);
    CHECK(slab_covariance(1.0, 2.0, std::exp(-s0p), p, b) == 0.0);
    CHECK(slab_covariance(1.0, 2.0, std::exp(-s0p) * 1.0001, p, b) == 0.0);
    CHECK(slab_covariance(1.0, 2.0, std::exp(-s0p) * 0.9, p, b) > 0.0);
  }

  SUBCASE("independent Simpson oracle") {
    auto oracle = [&](double s0, double s1, double r) {
      const double s0p = solve_scale_time(s0, p);
      const double s1p = solve_scale_time(s1, p);
      const double hi = std::min(s1p, std::log(1.0 / r));
      if (hi <= s0p) return 0.0;
      const int n = 40000;
      const double h = (hi - s0p) / n;
      double acc = 0.0;
      for (int i = 0; i <= n; ++i) {
        const double s = s0p + i * h;
        const double f = (1.0 - std::exp(-s)) * b(std::exp(s) * r);
        acc += ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0)) * f;
      }
      return acc * h / 3.0;
    };
    for (const auto& [s0, s1, r] :
         {std::tuple{0.0, 4.0, 0.1}, {0.5, 1.5, 0.3}, {2.0, 6.0, 0.05}}) {
      CHECK(slab_covariance(s0, s1, r, p, b) ==
            doctest::Approx(oracle(s0, s1, r)).epsilon(1e-9));
    }
  }

  SUBCASE("pure star-scale slab mass at r = 1/2") {
    StarScaleParams p0 = p;
    p0.eta1 = 0.0;
    const double v = slab_covariance(0.0, 20.0, 0.5, p0, b);
    CHECK(v <= std::log(2.0));
    CHECK(v >= std::log(2.0) - 2.5);  // fitted envelope constant
  }
}

TEST_CASE("k_t values and bounds") {
  StarScaleParams p = params11();
  const BumpProfile& b = BumpProfile::standard(1);

  CHECK(k_t_value(3.0, 0.0, p, b) == doctest::Approx(3.0).epsilon(1e-11));
  CHECK(k_t_value(4.0, 1.0, p, b) == 0.0);
  StarScaleParams pk = p;
  pk.k0_constant = 0.7;
  CHECK(k_t_value(3.0, 0.0, pk, b) == doctest::Approx(3.7).epsilon(1e-11));
  CHECK(k_t_value(4.0, 1.0, pk, b) == doctest::Approx(0.7).epsilon(1e-13));

  SUBCASE("log envelope at r = e^-3") {
    const double v = k_t_value(10.0, std::exp(-3.0), p, b);
    CHECK(std::abs(v - 3.0) <= 2.5);
  }

  SUBCASE("monotonicity in t and r") {
    double prev = 0.0;
    for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      const double v = k_t_value(t, 0.125, p, b);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
    const CovarianceTable tab = build_kbar_table(6.0, p, b);
    const auto& vals = tab.radial.values();
    for (std::size_t i = 1; i < vals.size(); ++i)
      CHECK(vals[i] <= vals[i - 1] + 1e-10);
  }

  SUBCASE("steak bound at every table node") {
    for (double t : {1.0, 4.0, 8.0, 12.0})
      CHECK(steak_bound_holds(build_kbar_table(t, p, b)));
  }
}

TEST_CASE("mollified covariances") {
  const StarScaleParams p = params11();
  const BumpProfile& b = BumpProfile::standard(1);

  SUBCASE("cross covariance vanishes at t = 0") {
    CHECK(mollified_covariance(0.0, 0.25, 0.3, CovKind::kKbarCross,
                               ThetaKind::kStandard, p, b, 1.0 / 512) == 0.0);
  }

  SUBCASE("variance at r=0 tracks log(1/eps)") {
    for (double eps : {0.5, 0.125, 0.03125, 0.00390625}) {
      const double v = mollified_covariance(-1.0, eps, 0.0, CovKind::kKEps,
                                            ThetaKind::kStandard, p, b, eps / 64);
      CHECK(std::abs(v - std::log(1.0 / eps)) <= 2.5);
    }
  }

  SUBCASE("mollifier wider than the kernel range") {
    const double v = mollified_covariance(-1.0, 1.0, 0.0, CovKind::kKEps,
                                          ThetaKind::kStandard, p, b, 1.0 / 256);
    CHECK(v <= 2.5);
  }

  SUBCASE("cross covariance against dense quadrature, d=2") {
    StarScaleParams p2 = p;
    p2.dim = 2;
    const BumpProfile& b2 = BumpProfile::standard(2);
    const double eps = 0.0625, r = 0.3, t = 6.0;
    const double got = mollified_covariance(t, eps, r, CovKind::kKbarCross,
                                            ThetaKind::kStandard, p2, b2, eps / 32);
    const CovarianceTable kbar = build_kbar_table(t, p2, b2);
    const double norm = integrate(
        [&](double u) {
          return 2.0 * M_PI * u * theta_unnormalized(ThetaKind::kStandard, u);
        },
        0.0, 1.0, 1e-13);
    const int n = 400;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double z1 = (-1.0 + (2.0 * i + 1.0) / n) * eps;
        const double z2 = (-1.0 + (2.0 * j + 1.0) / n) * eps;
        const double w =
            theta_unnormalized(ThetaKind::kStandard, std::hypot(z1, z2) / eps) /
            (norm * eps * eps);
        if (w > 0.0)
          acc += w * kbar(std::hypot(r - z1, z2)) * (2.0 * eps / n) * (2.0 * eps / n);
      }
    }
    CHECK(got == doctest::Approx(acc).epsilon(2e-6));
  }

  SUBCASE("rejects nonpositive eps") {
    CHECK_THROWS_AS(mollified_covariance(1.0, 0.0, 0.1, CovKind::kKEps,
                                         ThetaKind::kStandard, p, b, 1e-3),
                    ValidationError);
  }

  SUBCASE("log bound envelope over the test lattice") {
    double worst = 0.0;
    for (int ti = 1; ti <= 12; ++ti) {
      for (int ei = 1; ei <= 8; ++ei) {
        const double t = ti, eps = std::pow(2.0, -ei);
        std::vector<double> radii{0.0};
        for (int kk = 1; kk <= 8; ++kk) radii.push_back(std::pow(2.0, -kk));
        std::vector<double> values;
        for (double r : radii)
          values.push_back(mollified_covariance(t, eps, r, CovKind::kKEps,
                                                ThetaKind::kStandard, p, b,
                                                eps / 16));
        worst = std::max(worst, log_bound_deviation(t, eps, radii, values));
      }
    }
    CHECK(worst <= 5.0);  // the qualitative constant
    CHECK(worst <= 2.6);  // fitted value, frozen
  }
}

TEST_CASE("covariance table dump") {
  const StarScaleParams p = params11();
  const CovarianceTable tab = build_kbar_table(2.0, p, BumpProfile::standard(1));
  std::ostringstream os;
  tab.dump_csv(os);
  const std::string out = os.str();
  CHECK(out.rfind("r,value\n", 0) == 0);
  CHECK(std::count(out.begin(), out.end(), '\n') == 4097);  // header + nodes
}

TEST_CASE("theta lattice weights") {
  const ThetaWeights1d tw = theta_lattice_weights_1d(ThetaKind::kStandard, 0.1, 0.01);
  double sum = 0.0;
  for (double w : tw.w) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  const ThetaWeights2d tw2 = theta_lattice_weights_2d(ThetaKind::kSharp, 0.1, 0.02);
  sum = 0.0;
  for (double w : tw2.w) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}
