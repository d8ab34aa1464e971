#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "gmc/analytics.hpp"
#include "gmc/errors.hpp"
#include "gmc/rng.hpp"
#include "gmc/sampler.hpp"
#include "gmc/stats.hpp"

using namespace gmc;

namespace {

StarScaleParams params1d() {
  StarScaleParams p;
  p.eta1 = 1.0;
  p.eta2 = 1.0;
  p.dim = 1;
  return p;
}

// Collects the field and barrier at every snapshot.
struct Collect : ReplicateVisitor {
  std::vector<std::vector<double>> fields, barriers;
  std::vector<double> ts;
  void on_snapshot(const Snapshot& s) override {
    ts.push_back(s.t);
    fields.emplace_back(s.xbar.begin(), s.xbar.end());
    barriers.emplace_back(s.barrier_max.begin(), s.barrier_max.end());
  }
};

}  // namespace

TEST_CASE("schedule construction") {
  const ScaleSchedule s = make_schedule(2.0, 0.05, {0.7, 1.0, 2.0});
  CHECK(s.levels.front() == 0.0);
  CHECK(s.levels.back() == 2.0);
  for (std::size_t i = 1; i < s.levels.size(); ++i)
    CHECK(s.levels[i] - s.levels[i - 1] <= 0.05 + 1e-12);
  for (double snap : {0.7, 1.0, 2.0}) {
    bool found = false;
    for (double l : s.levels) found |= std::abs(l - snap) < 1e-12;
    CHECK(found);
  }
  CHECK_THROWS_AS(make_schedule(2.0, 0.2, {1.0}), ValidationError);
}

TEST_CASE("resolvable scale rule") {
  GridSpec g{1, 64, 2.0};  // log(1/spacing) = log 32 = 3.47
  CHECK_THROWS_AS(check_resolvable(g, make_schedule(4.0, 0.05, {4.0})),
                  ValidationError);
  CHECK_NOTHROW(check_resolvable(g, make_schedule(3.0, 0.05, {3.0})));
}

TEST_CASE("determinism and stream independence") {
  const GridSpec g{1, 256, 2.0};
  const ScaleSchedule sch = make_schedule(1.0, 0.05, {1.0});
  const FieldSampler sampler(g, sch, params1d());
  WorkerContext ctx(g);

  Collect a, b, c;
  sampler.run_replicate(99, 3, a, ctx);
  sampler.run_replicate(99, 3, b, ctx);
  sampler.run_replicate(99, 4, c, ctx);
  REQUIRE(a.fields.size() == 1);
  CHECK(a.fields[0] == b.fields[0]);   // bit-identical
  CHECK(a.barriers[0] == b.barriers[0]);
  CHECK(a.fields[0] != c.fields[0]);   // different replicate stream
}

TEST_CASE("single point trajectory is Brownian") {
  const GridSpec g{1, 256, 2.0};
  const ScaleSchedule sch = make_schedule(2.0, 0.05, {0.5, 1.0, 1.5, 2.0});
  const FieldSampler sampler(g, sch, params1d());
  WorkerContext ctx(g);

  const int n = 1200;
  const std::size_t pt = 40;
  std::vector<std::vector<double>> incr(4, std::vector<double>(n));
  for (int r = 0; r < n; ++r) {
    Collect c;
    sampler.run_replicate(2024, r, c, ctx);
    double prev = 0.0;
    for (int k = 0; k < 4; ++k) {
      incr[k][r] = c.fields[k][pt] - prev;
      prev = c.fields[k][pt];
    }
  }
  // Var of each half-unit increment is 1/2, disjoint increments uncorrelated.
  for (int k = 0; k < 4; ++k) {
    const MeanSe ms = mean_se(incr[k]);
    CHECK(std::abs(ms.sd * ms.sd - 0.5) <= 3.0 * 0.5 * std::sqrt(2.0 / (n - 1)));
    CHECK(std::abs(ms.mean) <= 3.0 * ms.se);
  }
  for (int k = 0; k + 1 < 4; ++k) {
    const double corr = sample_corr(incr[k], incr[k + 1]);
    CHECK(std::abs(corr) <= 3.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("stationarity and finite range") {
  const GridSpec g{1, 256, 2.0};
  const ScaleSchedule sch = make_schedule(1.0, 0.05, {1.0});
  const FieldSampler sampler(g, sch, params1d());
  WorkerContext ctx(g);

  const int n = 1500;
  const std::size_t lag = 16;  // 0.125 in box units
  std::vector<double> xa(n), xb(n), xc(n), xd(n);
  for (int r = 0; r < n; ++r) {
    Collect c;
    sampler.run_replicate(5150, r, c, ctx);
    xa[r] = c.fields[0][10];
    xb[r] = c.fields[0][10 + lag];
    xc[r] = c.fields[0][90];
    xd[r] = c.fields[0][90 + lag];
  }
  const double c1 = sample_cov(xa, xb);
  const double c2 = sample_cov(xc, xd);
  const double expected = sampler.lattice_cov(1.0, lag);
  const double se = gaussian_cov_se(1.0, 1.0, expected, n);
  CHECK(std::abs(c1 - expected) <= 3.0 * se);
  CHECK(std::abs(c2 - expected) <= 3.0 * se);
  CHECK(std::abs(c1 - c2) <= 3.0 * std::sqrt(2.0) * se);

  // Analytic finite range: zero covariance beyond e^{-0'} = 1.
  CHECK(sampler.lattice_cov(1.0, 128) == 0.0);
}

TEST_CASE("bridge maximum refinement") {
  SUBCASE("degenerate bridge") {
    CHECK(bridge_max_sample(0.0, 0.0, 0.0, 0.5) == 0.0);
    CHECK(bridge_max_sample(1.0, -1.0, 0.0, 0.9) == 1.0);
  }
  SUBCASE("exact law via Kolmogorov-Smirnov") {
    RngStream rng(31337, 0);
    const int n = 100000;
    std::vector<double> draws(n);
    for (int i = 0; i < n; ++i) draws[i] = bridge_max_sample(0.0, 0.0, 1.0, rng.uniform());
    const double d = ks_statistic(
        draws,
        [](double m, const void*) {
          return m <= 0.0 ? 0.0 : 1.0 - std::exp(-2.0 * m * m);
        },
        nullptr);
    CHECK(d <= 1.82 / std::sqrt(static_cast<double>(n)));
  }
  SUBCASE("refinement never decreases the barrier") {
    const GridSpec g{1, 128, 2.0};
    const ScaleSchedule sch = make_schedule(1.0, 0.05, {0.5, 1.0});
    const FieldSampler sampler(g, sch, params1d());
    WorkerContext ctx(g);
    const double drift = std::sqrt(2.0);
    for (int r = 0; r < 20; ++r) {
      Collect c;
      sampler.run_replicate(7, r, c, ctx);
      for (std::size_t i = 0; i < 128; ++i) {
        CHECK(c.barriers[1][i] >= c.barriers[0][i]);
        CHECK(c.barriers[1][i] >= c.fields[1][i] - drift * 1.0 - 1e-12);
        CHECK(c.barriers[0][i] >= 0.0);  // sup includes the start at 0
      }
    }
  }
}

TEST_CASE("k0 constant mode") {
  StarScaleParams p = params1d();
  p.k0_constant = 0.5;
  const GridSpec g{1, 128, 2.0};
  const ScaleSchedule sch = make_schedule(1.0, 0.05, {1.0});
  const FieldSampler sampler(g, sch, p);
  WorkerContext ctx(g);
  const int n = 1200;
  std::vector<double> x0s(n);
  struct V : ReplicateVisitor {
    double x0 = 0.0, sigma2 = 0.0;
    void on_snapshot(const Snapshot& s) override {
      x0 = s.x0;
      sigma2 = s.sigma2;
    }
  };
  for (int r = 0; r < n; ++r) {
    V v;
    sampler.run_replicate(8, r, v, ctx);
    x0s[r] = v.x0;
    CHECK(v.sigma2 == doctest::Approx(1.5).epsilon(1e-12));
  }
  const MeanSe ms = mean_se(x0s);
  CHECK(std::abs(ms.sd * ms.sd - 0.5) <= 3.0 * 0.5 * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("dense factorization path") {
  const GridSpec g{1, 64, 2.0};
  const ScaleSchedule sch = make_schedule(1.0, 0.05, {1.0});
  FieldSampler::Options opt;
  opt.force_dense = true;
  const FieldSampler dense(g, sch, params1d(), opt);
  const FieldSampler spectral(g, sch, params1d());
  WorkerContext ctx(g);

  const int n = 1500;
  std::vector<double> xa(n), xb(n);
  for (int r = 0; r < n; ++r) {
    Collect c;
    dense.run_replicate(11, r, c, ctx);
    xa[r] = c.fields[0][5];
    xb[r] = c.fields[0][5 + 8];
  }
  const MeanSe ms = mean_se(xa);
  CHECK(std::abs(ms.sd * ms.sd - 1.0) <= 3.0 * std::sqrt(2.0 / (n - 1)));
  const double expected = spectral.lattice_cov(1.0, 8);
  CHECK(std::abs(sample_cov(xa, xb) - expected) <=
        3.0 * gaussian_cov_se(1.0, 1.0, expected, n));
}

TEST_CASE("two dimensional sampler") {
  StarScaleParams p = params1d();
  p.dim = 2;
  const GridSpec g{2, 32, 2.0};
  const ScaleSchedule sch = make_schedule(1.0, 0.05, {1.0});
  const FieldSampler sampler(g, sch, p);
  WorkerContext ctx(g);
  const int n = 900;
  std::vector<double> xa(n), xb(n);
  for (int r = 0; r < n; ++r) {
    Collect c;
    sampler.run_replicate(12, r, c, ctx);
    xa[r] = c.fields[0][3 * 32 + 4];
    xb[r] = c.fields[0][3 * 32 + 8];  // lag 4 cells along the second axis
  }
  const MeanSe ms = mean_se(xa);
  CHECK(std::abs(ms.sd * ms.sd - 1.0) <= 3.0 * std::sqrt(2.0 / (n - 1)));
  // Covariance at lag 4 along an axis, against the analytic value.
  const double cexp = slab_covariance(0.0, 1.0, 4.0 * g.spacing(), p,
                                      BumpProfile::standard(2));
  CHECK(std::abs(sample_cov(xa, xb) - cexp) <=
        3.0 * gaussian_cov_se(1.0, 1.0, cexp, n));
}

TEST_CASE("mollification") {
  const GridSpec g{1, 2048, 2.0};
  const StarScaleParams p = params1d();
  const double eps = 0.0625;
  const double t_src = mollify_stand_in_t(eps);  // log 16 + 4
  const ScaleSchedule sch = make_schedule(t_src, 0.05, {t_src});
  const FieldSampler sampler(g, sch, p);

  SUBCASE("unresolvable mollifier is rejected by name") {
    try {
      LatticeMollifier bad(g, 3.0 * g.spacing(), ThetaKind::kStandard);
      FAIL("expected UnresolvableMollifier");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("UnresolvableMollifier") !=
            std::string::npos);
    }
  }

  SUBCASE("convolution preserves constants and matches direct sums") {
    const LatticeMollifier moll(g, eps, ThetaKind::kStandard);
    WorkerContext ctx(g);
    std::vector<double> ones(2048, 1.0), out(2048);
    moll.convolve(ones, out, ctx);
    for (double v : out) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("variance and cross covariance match the discrete tables") {
    const LatticeMollifier moll(g, eps, ThetaKind::kStandard);
    std::vector<double> cov_seq(2048);
    for (std::size_t j = 0; j < cov_seq.size(); ++j)
      cov_seq[j] = sampler.lattice_cov(t_src, j);
    const double sigma2 = moll.mollified_variance(cov_seq);
    const double cross0 = moll.mollified_cross_cov(cov_seq, 40);

    WorkerContext ctx(g);
    const int n = 900;
    std::vector<double> xe(n), xb(n);
    struct V : ReplicateVisitor {
      const LatticeMollifier* moll;
      WorkerContext* ctx;
      double eps;
      double xeps = 0.0, xbar = 0.0;
      void on_snapshot(const Snapshot& s) override {
        const MollifiedField f = mollify_field(s, eps, moll->theta(), *moll, *ctx);
        xeps = f.values[100];
        xbar = s.xbar[140];
      }
    };
    for (int r = 0; r < n; ++r) {
      V v;
      v.moll = &moll;
      v.ctx = &ctx;
      v.eps = eps;
      sampler.run_replicate(13, r, v, ctx);
      xe[r] = v.xeps;
      xb[r] = v.xbar;
    }
    const MeanSe ms = mean_se(xe);
    CHECK(std::abs(ms.sd * ms.sd - sigma2) <=
          3.0 * sigma2 * std::sqrt(2.0 / (n - 1)));
    CHECK(std::abs(sample_cov(xe, xb) - cross0) <=
          3.0 * gaussian_cov_se(sigma2, t_src, cross0, n));
  }

  SUBCASE("tail variance of the stand-in is small and reported") {
    const double tv =
        mollified_tail_variance(t_src, eps, ThetaKind::kStandard, p,
                                BumpProfile::standard(1));
    CHECK(tv > 0.0);
    CHECK(tv <= 1e-2);
  }
}
