#include "gmc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "gmc/analytics.hpp"
#include "gmc/errors.hpp"
#include "gmc/rng.hpp"
#include "gmc/stats.hpp"

namespace gmc {

namespace {

std::string fmt(const char* pattern, double a) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), pattern, a);
  return buf;
}
std::string fmt(const char* pattern, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}
std::string fmt(const char* pattern, int a) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), pattern, a);
  return buf;
}
std::string fmt(const char* pattern, int a, int b) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

// Fixed worker pool over replicate indices; results land in preallocated
// per-replicate rows, so aggregation order is canonical no matter how the
// work was scheduled.
void parallel_replicates(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t worker, std::size_t index)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(0, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count) return;
          fn(w, i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double integrate_abs_z(const MeasureWeights& mw, const SetSpec& set,
                       const GridSpec& grid) {
  const double cell = std::pow(grid.spacing(), grid.dim);
  const std::size_t wp = mw.window;
  KahanSum sum;
  for (const auto& b : set.boxes)
    for (std::size_t i0 = b.lo0; i0 < b.hi0; ++i0) {
      if (grid.dim == 1) {
        sum.add(std::abs(mw.z[i0]));
      } else {
        for (std::size_t i1 = b.lo1; i1 < b.hi1; ++i1)
          sum.add(std::abs(mw.z[i0 * wp + i1]));
      }
    }
  return sum.value() * cell;
}

}  // namespace

void ExperimentConfig::validate() const {
  kernel.validate();
  grid.validate();
  if (grid.dim != kernel.dim)
    throw ValidationError("config: grid and kernel dimension disagree");
  if (replicates < 100)
    throw ValidationError("config: gated experiments need at least 100 replicates");
  if (snapshots.empty()) throw ValidationError("config: snapshots must be nonempty");
  for (double q : qs)
    if (!(q > 0.0)) throw ValidationError("config: q values must be positive");
  const double crit = critical_alpha(kernel.dim);
  for (double b : subcritical_betas)
    if (!(b > 0.0 && b < crit))
      throw ValidationError("config: subcritical offsets must lie in (0, sqrt(2d))");
  for (double e : epsilons)
    if (!(e > 0.0 && e < 1.0))
      throw ValidationError("config: epsilons must lie in (0,1)");
  if (!(se_gate >= 1.0)) throw ValidationError("config: SE gate must be >= 1");
  if (!(fd_dalpha > 0.0 && fd_dalpha < 0.1))
    throw ValidationError("config: fd_dalpha out of range");
}

std::size_t ExperimentConfig::effective_threads() const {
  if (threads > 0) return static_cast<std::size_t>(threads);
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

std::size_t CampaignResult::col(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end())
    throw ValidationError("campaign: missing column " + name);
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> CampaignResult::column(const std::string& name) const {
  const std::size_t c = col(name);
  std::vector<double> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out[r] = rows[r][c];
  return out;
}

int RunRecord::exit_code() const {
  bool inconclusive = false;
  for (const auto& v : verdicts) {
    if (v.status == "FAIL") return 1;
    if (v.status == "INCONCLUSIVE") inconclusive = true;
  }
  return inconclusive ? 4 : 0;
}

// ---- Core campaign ---------------------------------------------------

namespace {

struct CoreSchema {
  std::vector<std::string> columns;
  std::size_t probe_cell = 0;
  std::size_t slab_index = 0;
  std::size_t cell_a = 0, cell_b = 0;
  double t_cov = 0.0;
  std::vector<std::size_t> cov_lag_cells;
  std::size_t idx(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return static_cast<std::size_t>(it - columns.begin());
  }
};

class CoreVisitor : public ReplicateVisitor {
 public:
  CoreVisitor(const ExperimentConfig& config, const CoreSchema& schema,
              const SetSpec& set, const GridSpec& grid, double* row)
      : config_(config), schema_(schema), set_(set), grid_(grid), row_(row) {}

  void on_slab(std::size_t slab_index, double, double,
               std::span<const double> increment) override {
    if (slab_index != schema_.slab_index) return;
    row_[schema_.idx("inc_a")] = increment[schema_.cell_a];
    row_[schema_.idx("inc_b")] = increment[schema_.cell_b];
  }

  void on_snapshot(const Snapshot& snap) override {
    const double t = snap.t;
    const double crit = critical_alpha(grid_.dim);
    row_[schema_.idx(fmt("xbar_t%g", t))] = snap.xbar[schema_.probe_cell];

    if (std::abs(t - schema_.t_cov) < 1e-12) {
      row_[schema_.idx("cx_base")] = snap.xbar[schema_.probe_cell];
      for (std::size_t j = 0; j < schema_.cov_lag_cells.size(); ++j)
        row_[schema_.idx(fmt("cx_l%d", static_cast<int>(j)))] =
            snap.xbar[schema_.probe_cell + schema_.cov_lag_cells[j]];
    }

    const MeasureWeights untrunc = weight_fields(snap, crit, std::nullopt);
    row_[schema_.idx(fmt("Mcrit_t%g", t))] =
        integrate(untrunc, set_, Family::kMCrit, grid_);
    row_[schema_.idx(fmt("D_t%g", t))] = integrate(untrunc, set_, Family::kD, grid_);
    row_[schema_.idx(fmt("Dabs_t%g", t))] = integrate_abs_z(untrunc, set_, grid_);

    const MeasureWeights fd_lo =
        weight_fields(snap, crit - config_.fd_dalpha, std::nullopt);
    const MeasureWeights fd_hi =
        weight_fields(snap, crit + config_.fd_dalpha, std::nullopt);
    row_[schema_.idx(fmt("Mfdlo_t%g", t))] =
        integrate(fd_lo, set_, Family::kMAlpha, grid_);
    row_[schema_.idx(fmt("Mfdhi_t%g", t))] =
        integrate(fd_hi, set_, Family::kMAlpha, grid_);

    for (double q : config_.qs) {
      const MeasureWeights wq = weight_fields(snap, crit, q);
      row_[schema_.idx(fmt("M_q%g_t%g", q, t))] =
          integrate(wq, set_, Family::kMCrit, grid_);
      row_[schema_.idx(fmt("D_q%g_t%g", q, t))] =
          integrate(wq, set_, Family::kD, grid_);
    }

    if (std::abs(t - config_.snapshots.back()) < 1e-12) {
      const MeasureWeights wqs = weight_fields(snap, crit, config_.subcritical_q);
      row_[schema_.idx("D_qsub")] = integrate(wqs, set_, Family::kD, grid_);
      for (double beta : config_.subcritical_betas) {
        const MeasureWeights wa =
            weight_fields(snap, crit - beta, config_.subcritical_q);
        row_[schema_.idx(fmt("Msub_b%g", beta))] =
            integrate(wa, set_, Family::kMAlpha, grid_);
      }
      // Window-wide barrier statistic sup_{t, x in window} (xbar - sqrt(2d) s).
      double sup = -1e300;
      const std::size_t wp = grid_.window_points();
      const std::size_t n = grid_.points_per_side;
      const std::size_t wtotal = grid_.dim == 1 ? wp : wp * wp;
      for (std::size_t c = 0; c < wtotal; ++c) {
        const std::size_t idx = grid_.dim == 1 ? c : (c / wp) * n + (c % wp);
        sup = std::max(sup, snap.barrier_max[idx]);
      }
      row_[schema_.idx("supstat")] = sup;
      // Coincidence identity: when the window barrier stays below q the
      // truncation is inactive and M^(q) equals M exactly, bit for bit.
      const double q_top = config_.qs.back();
      double coincide = 1.0;
      if (sup < q_top) {
        const double mq = row_[schema_.idx(fmt("M_q%g_t%g", q_top, t))];
        const double mu = row_[schema_.idx(fmt("Mcrit_t%g", t))];
        coincide = (mq == mu) ? 1.0 : 0.0;
      }
      row_[schema_.idx("coincide_ok")] = coincide;
    }
  }

 private:
  const ExperimentConfig& config_;
  const CoreSchema& schema_;
  const SetSpec& set_;
  const GridSpec& grid_;
  double* row_;
};

}  // namespace

CampaignResult run_core_campaign(const ExperimentConfig& config) {
  config.validate();
  const ScaleSchedule schedule =
      make_schedule(config.t_max, config.max_step, config.snapshots);
  FieldSampler sampler(config.grid, schedule, config.kernel,
                       {config.bridge_refine});
  const SetSpec set =
      SetSpec::from_unit_coords(config.grid, config.set_boxes, config.set_id);
  const GridSpec& grid = config.grid;
  const std::size_t wp = grid.window_points();

  CoreSchema schema;
  schema.probe_cell = wp / 4;
  // Designated slab for the finite-range check: first slab starting at or
  // after 0.5, probed at a lag beyond its support e^{-s0}.
  schema.slab_index = 0;
  for (std::size_t i = 0; i + 1 < schedule.levels.size(); ++i)
    if (schedule.levels[i] >= 0.5 - 1e-12) {
      schema.slab_index = i;
      break;
    }
  const double slab_s0 = schedule.levels[schema.slab_index];
  const double h = grid.spacing();
  schema.cell_a = wp / 8;
  std::size_t lag = static_cast<std::size_t>(std::ceil(std::exp(-slab_s0) / h)) + 1;
  schema.cell_b = schema.cell_a + lag;
  // Covariance probe level: the snapshot closest to 4.
  schema.t_cov = config.snapshots.front();
  for (double s : config.snapshots)
    if (std::abs(s - 4.0) < std::abs(schema.t_cov - 4.0)) schema.t_cov = s;
  for (int j = 1; j <= 10; ++j) {
    const auto cells = static_cast<std::size_t>(
        std::max(1.0, std::round(std::pow(2.0, -j) / h)));
    schema.cov_lag_cells.push_back(cells);
  }

  schema.columns = {"inc_a", "inc_b", "cx_base", "supstat", "D_qsub",
                    "coincide_ok"};
  for (std::size_t j = 0; j < schema.cov_lag_cells.size(); ++j)
    schema.columns.push_back(fmt("cx_l%d", static_cast<int>(j)));
  for (double t : config.snapshots) {
    schema.columns.push_back(fmt("xbar_t%g", t));
    schema.columns.push_back(fmt("Mcrit_t%g", t));
    schema.columns.push_back(fmt("D_t%g", t));
    schema.columns.push_back(fmt("Dabs_t%g", t));
    schema.columns.push_back(fmt("Mfdlo_t%g", t));
    schema.columns.push_back(fmt("Mfdhi_t%g", t));
    for (double q : config.qs) {
      schema.columns.push_back(fmt("M_q%g_t%g", q, t));
      schema.columns.push_back(fmt("D_q%g_t%g", q, t));
    }
  }
  for (double beta : config.subcritical_betas)
    schema.columns.push_back(fmt("Msub_b%g", beta));

  CampaignResult result;
  result.columns = schema.columns;
  result.rows.assign(config.replicates,
                     std::vector<double>(schema.columns.size(), 0.0));

  const std::size_t threads = config.effective_threads();
  std::vector<std::unique_ptr<WorkerContext>> contexts;
  for (std::size_t w = 0; w < threads; ++w)
    contexts.push_back(std::make_unique<WorkerContext>(grid));

  parallel_replicates(config.replicates, threads, [&](std::size_t w, std::size_t r) {
    CoreVisitor visitor(config, schema, set, grid, result.rows[r].data());
    sampler.run_replicate(config.seed, r, visitor, *contexts[w]);
  });

  // Metadata for the verdict stage.
  result.meta["lambda_set"] = set.lebesgue(grid);
  result.meta["t_cov"] = schema.t_cov;
  result.meta["slab_s0"] = slab_s0;
  result.meta["slab_lag"] = static_cast<double>(lag) * h;
  result.meta["spectral_floor"] = sampler.spectral_floor();
  result.meta["fd_dalpha"] = config.fd_dalpha;
  std::vector<double> expected;
  for (std::size_t cells : schema.cov_lag_cells)
    expected.push_back(sampler.lattice_cov(schema.t_cov, cells));
  result.meta_vec["cov_expected"] = expected;
  result.meta_vec["cov_lags"] = {};
  for (std::size_t cells : schema.cov_lag_cells)
    result.meta_vec["cov_lags"].push_back(static_cast<double>(cells) * h);
  const CovarianceTable kbar =
      build_kbar_table(config.t_max, config.kernel, BumpProfile::standard(config.kernel.dim));
  result.meta["steak_ok"] = steak_bound_holds(kbar) ? 1.0 : 0.0;
  return result;
}

// ---- Mollified campaign ------------------------------------------------

namespace {

struct MollSchema {
  std::vector<std::string> columns;
  std::vector<double> t_eps, t_source;
  double t_probe = 4.0;
  std::size_t probe_cell = 0;
  std::vector<std::size_t> cross_lag_cells;
  std::size_t mid = 0;  // index of the epsilon used for cross probes
  std::size_t lp_cells = 512;
  std::size_t idx(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return static_cast<std::size_t>(it - columns.begin());
  }
};

class MollVisitor : public ReplicateVisitor {
 public:
  MollVisitor(const ExperimentConfig& config, const MollSchema& schema,
              const SetSpec& set, const GridSpec& grid,
              const std::vector<const LatticeMollifier*>& mollifiers,
              const std::vector<double>& sigma2, WorkerContext& ctx, double* row)
      : config_(config),
        schema_(schema),
        set_(set),
        grid_(grid),
        mollifiers_(mollifiers),
        sigma2_(sigma2),
        ctx_(ctx),
        row_(row) {
    barrier_buf_.resize(config.epsilons.size());
  }

  void on_snapshot(const Snapshot& snap) override {
    const double t = snap.t;
    const double crit = critical_alpha(grid_.dim);
    const std::size_t ne = config_.epsilons.size();

    if (std::abs(t - schema_.t_probe) < 1e-12) {
      for (std::size_t j = 0; j < schema_.cross_lag_cells.size(); ++j)
        row_[schema_.idx(fmt("crossxb_l%d", static_cast<int>(j)))] =
            snap.xbar[schema_.probe_cell + schema_.cross_lag_cells[j]];
    }

    for (std::size_t e = 0; e < ne; ++e) {
      if (std::abs(t - schema_.t_eps[e]) < 1e-12)
        barrier_buf_[e].assign(snap.barrier_max.begin(), snap.barrier_max.end());
      if (std::abs(t - schema_.t_source[e]) < 1e-12) {
        const double eps = config_.epsilons[e];
        for (int th = 0; th < 2; ++th) {
          const LatticeMollifier& moll = *mollifiers_[e * 2 + th];
          const MollifiedField field = mollify_field(snap, eps, moll.theta(), moll, ctx_);
          const MeasureWeights mw = weight_fields_mollified(
              field, barrier_buf_[e], grid_, sigma2_[e * 2 + th], config_.mollified_q);
          row_[schema_.idx(fmt("Meps_e%d_th%d", static_cast<int>(e), th))] =
              integrate(mw, set_, Family::kMEps, grid_);
          if (th == 0) {
            row_[schema_.idx(fmt("xeps_e%d", static_cast<int>(e)))] =
                field.values[schema_.probe_cell];
            lp_scratch_[0] = mass_vector(mw);
          } else {
            lp_scratch_[1] = mass_vector(mw);
            row_[schema_.idx(fmt("lp_e%d", static_cast<int>(e)))] =
                levy_prokhorov_1d(lp_scratch_[0], lp_scratch_[1],
                                  1.0 / static_cast<double>(schema_.lp_cells));
          }
        }
      }
    }

    if (std::abs(t - schema_.t_source.back()) < 1e-12) {
      const MeasureWeights wq = weight_fields(snap, crit, config_.mollified_q);
      row_[schema_.idx("D_T")] = integrate(wq, set_, Family::kD, grid_);
    }
  }

 private:
  // Window masses coarsened to lp_cells cells, for the measure-distance
  // diagnostic.
  std::vector<double> mass_vector(const MeasureWeights& mw) const {
    const std::size_t wp = mw.window;
    const std::size_t block = wp / schema_.lp_cells;
    std::vector<double> mass(schema_.lp_cells, 0.0);
    const double cell = grid_.spacing();
    for (std::size_t c = 0; c < wp; ++c) mass[c / block] += mw.w[c] * cell;
    return mass;
  }

  const ExperimentConfig& config_;
  const MollSchema& schema_;
  const SetSpec& set_;
  const GridSpec& grid_;
  const std::vector<const LatticeMollifier*>& mollifiers_;
  const std::vector<double>& sigma2_;
  WorkerContext& ctx_;
  double* row_;
  std::vector<std::vector<double>> barrier_buf_;
  std::array<std::vector<double>, 2> lp_scratch_;
};

}  // namespace

CampaignResult run_mollified_campaign(const ExperimentConfig& config) {
  config.validate();
  const GridSpec& grid = config.mollified_grid;
  grid.validate();
  if (grid.dim != 1)
    throw ValidationError("mollified campaign: implemented for d=1");
  for (double eps : config.epsilons)
    if (eps < 4.0 * grid.spacing())
      throw ValidationError("UnresolvableMollifier: eps < 4*spacing");

  MollSchema schema;
  std::vector<double> eps_sorted = config.epsilons;  // given largest to smallest
  std::set<double> snap_set;
  for (double e : eps_sorted) {
    schema.t_eps.push_back(std::log(1.0 / e));
    schema.t_source.push_back(mollify_stand_in_t(e));
    snap_set.insert(schema.t_eps.back());
    snap_set.insert(schema.t_source.back());
  }
  const double t_max = *std::max_element(schema.t_source.begin(), schema.t_source.end());
  schema.t_probe = std::min(4.0, t_max);
  snap_set.insert(schema.t_probe);
  const ScaleSchedule schedule = make_schedule(
      t_max, config.max_step, std::vector<double>(snap_set.begin(), snap_set.end()));
  FieldSampler sampler(grid, schedule, config.kernel, {config.bridge_refine});
  const SetSpec set = SetSpec::from_unit_coords(grid, config.set_boxes, config.set_id);

  const std::size_t wp = grid.window_points();
  schema.probe_cell = wp / 4;
  const double h = grid.spacing();
  schema.cross_lag_cells = {0,
                            static_cast<std::size_t>(std::round(0.1 / h)),
                            static_cast<std::size_t>(std::round(0.3 / h))};
  schema.mid = eps_sorted.size() / 2;
  schema.lp_cells = std::min<std::size_t>(512, wp);

  // Mollifiers and exact discrete normalizations.
  std::vector<std::unique_ptr<LatticeMollifier>> mollifiers;
  std::vector<double> sigma2;
  CampaignResult result;
  for (std::size_t e = 0; e < eps_sorted.size(); ++e) {
    const std::vector<double> cov_seq_t =
        [&] {
          std::vector<double> seq(grid.points_per_side, 0.0);
          for (std::size_t j = 0; j < seq.size(); ++j)
            seq[j] = sampler.lattice_cov(schema.t_source[e], j);
          return seq;
        }();
    for (int th = 0; th < 2; ++th) {
      const ThetaKind kind = th == 0 ? ThetaKind::kStandard : ThetaKind::kSharp;
      mollifiers.push_back(std::make_unique<LatticeMollifier>(grid, eps_sorted[e], kind));
      sigma2.push_back(mollifiers.back()->mollified_variance(cov_seq_t) +
                       config.kernel.k0_constant);
      const double tail = mollified_tail_variance(
          schema.t_source[e], eps_sorted[e], kind, config.kernel,
          BumpProfile::standard(config.kernel.dim));
      result.meta[fmt("tail_var_e%d_th%d", static_cast<int>(e), th)] = tail;
    }
  }

  // Expected cross covariances at t_probe for the self-consistency check.
  {
    std::vector<double> cov_probe(grid.points_per_side, 0.0);
    for (std::size_t j = 0; j < cov_probe.size(); ++j)
      cov_probe[j] = sampler.lattice_cov(schema.t_probe, j);
    std::vector<double> expected;
    for (std::size_t cells : schema.cross_lag_cells)
      expected.push_back(mollifiers[schema.mid * 2]->mollified_cross_cov(
          cov_probe, static_cast<long>(cells)));
    result.meta_vec["cross_expected"] = expected;
  }

  schema.columns = {"D_T"};
  for (std::size_t e = 0; e < eps_sorted.size(); ++e) {
    schema.columns.push_back(fmt("Meps_e%d_th0", static_cast<int>(e)));
    schema.columns.push_back(fmt("Meps_e%d_th1", static_cast<int>(e)));
    schema.columns.push_back(fmt("xeps_e%d", static_cast<int>(e)));
    schema.columns.push_back(fmt("lp_e%d", static_cast<int>(e)));
  }
  for (std::size_t j = 0; j < schema.cross_lag_cells.size(); ++j)
    schema.columns.push_back(fmt("crossxb_l%d", static_cast<int>(j)));

  result.columns = schema.columns;
  result.rows.assign(config.replicates,
                     std::vector<double>(schema.columns.size(), 0.0));

  std::vector<const LatticeMollifier*> moll_ptrs;
  for (const auto& m : mollifiers) moll_ptrs.push_back(m.get());

  const std::size_t threads = config.effective_threads();
  std::vector<std::unique_ptr<WorkerContext>> contexts;
  for (std::size_t w = 0; w < threads; ++w)
    contexts.push_back(std::make_unique<WorkerContext>(grid));
  parallel_replicates(config.replicates, threads, [&](std::size_t w, std::size_t r) {
    MollVisitor visitor(config, schema, set, grid, moll_ptrs, sigma2, *contexts[w],
                        result.rows[r].data());
    sampler.run_replicate(config.seed ^ 0x6d6f6c6cULL, r, visitor, *contexts[w]);
  });

  result.meta["lambda_set"] = set.lebesgue(grid);
  result.meta["t_probe"] = schema.t_probe;
  result.meta["mid"] = static_cast<double>(schema.mid);
  for (std::size_t e = 0; e < eps_sorted.size(); ++e) {
    result.meta[fmt("t_eps_e%d", static_cast<int>(e))] = schema.t_eps[e];
    result.meta[fmt("sigma2_e%d", static_cast<int>(e))] = sigma2[e * 2];
  }
  return result;
}

// ---- Gauge campaign ----------------------------------------------------

namespace {

struct GaugeSchema {
  std::vector<std::string> columns;
  std::vector<SetSpec> dyadic_sets;
  std::vector<std::size_t> pair_lag_cells;
  std::size_t probe_cell = 0;
  double alpha_sub = 0.0;
  std::size_t idx(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return static_cast<std::size_t>(it - columns.begin());
  }
};

class GaugeVisitor : public ReplicateVisitor {
 public:
  GaugeVisitor(const ExperimentConfig& config, const GaugeSchema& schema,
               const GridSpec& grid, double* row)
      : config_(config), schema_(schema), grid_(grid), row_(row) {}

  void on_snapshot(const Snapshot& snap) override {
    const double crit = critical_alpha(grid_.dim);
    const MeasureWeights wq = weight_fields(snap, crit, config_.gauge_q);
    for (std::size_t k = 0; k < schema_.dyadic_sets.size(); ++k) {
      const double m = integrate(wq, schema_.dyadic_sets[k], Family::kMCrit, grid_);
      row_[schema_.idx(fmt("M2_k%d", static_cast<int>(k)))] = m * m;
    }
    // Dyadic modulus scan of the truncated derivative masses.
    const std::size_t wp = grid_.window_points();
    std::vector<double> masses(wp);
    const double h = grid_.spacing();
    for (std::size_t c = 0; c < wp; ++c) masses[c] = wq.z[c] * h;
    row_[schema_.idx("Dmod")] = dyadic_modulus_scan_1d(masses, -1);

    // Pair-moment probes for the envelope fits.
    const double w0 = wq.w[schema_.probe_cell];
    for (std::size_t j = 0; j < schema_.pair_lag_cells.size(); ++j)
      row_[schema_.idx(fmt("WW_l%d", static_cast<int>(j)))] =
          w0 * wq.w[schema_.probe_cell + schema_.pair_lag_cells[j]];
    const MeasureWeights wa = weight_fields(snap, schema_.alpha_sub, config_.gauge_q);
    const double wa0 = wa.w[schema_.probe_cell];
    for (std::size_t j = 0; j < schema_.pair_lag_cells.size(); ++j)
      row_[schema_.idx(fmt("WWsub_l%d", static_cast<int>(j)))] =
          wa0 * wa.w[schema_.probe_cell + schema_.pair_lag_cells[j]];
  }

 private:
  const ExperimentConfig& config_;
  const GaugeSchema& schema_;
  const GridSpec& grid_;
  double* row_;
};

}  // namespace

CampaignResult run_gauge_campaign(const ExperimentConfig& config, std::size_t window,
                                  std::uint64_t seed_salt) {
  GridSpec grid;
  grid.dim = 1;
  grid.points_per_side = window * 2;
  grid.box_side = 2.0;
  grid.validate();
  StarScaleParams kernel = config.kernel;
  kernel.dim = 1;
  const ScaleSchedule schedule =
      make_schedule(config.gauge_t, config.max_step, {config.gauge_t});
  FieldSampler sampler(grid, schedule, kernel, {config.bridge_refine});

  GaugeSchema schema;
  const double h = grid.spacing();
  for (int k = 0; k <= config.gauge_k_max; ++k) {
    const double len = std::pow(2.0, -k);
    schema.dyadic_sets.push_back(SetSpec::from_unit_coords(
        grid, {{0.0, len, 0.0, 0.0}}, fmt("dyadic_k%d", k)));
    schema.columns.push_back(fmt("M2_k%d", k));
  }
  schema.columns.push_back("Dmod");
  schema.probe_cell = grid.window_points() / 4;
  for (int j = 1; j <= 6; ++j) {
    schema.pair_lag_cells.push_back(static_cast<std::size_t>(
        std::max(1.0, std::round(std::pow(2.0, -j) / h))));
    schema.columns.push_back(fmt("WW_l%d", j - 1));
    schema.columns.push_back(fmt("WWsub_l%d", j - 1));
  }
  schema.alpha_sub = critical_alpha(1) - 0.25;

  CampaignResult result;
  result.columns = schema.columns;
  result.rows.assign(config.gauge_replicates,
                     std::vector<double>(schema.columns.size(), 0.0));
  const std::size_t threads = config.effective_threads();
  std::vector<std::unique_ptr<WorkerContext>> contexts;
  for (std::size_t w = 0; w < threads; ++w)
    contexts.push_back(std::make_unique<WorkerContext>(grid));
  parallel_replicates(config.gauge_replicates, threads,
                      [&](std::size_t w, std::size_t r) {
                        GaugeVisitor visitor(config, schema, grid,
                                             result.rows[r].data());
                        sampler.run_replicate(config.seed ^ seed_salt, r, visitor,
                                              *contexts[w]);
                      });
  result.meta["window"] = static_cast<double>(window);
  result.meta["t"] = config.gauge_t;
  result.meta["alpha_sub"] = schema.alpha_sub;
  for (int k = 0; k <= config.gauge_k_max; ++k)
    result.meta[fmt("len_k%d", k)] = std::pow(2.0, -k);
  result.meta_vec["pair_lags"] = {};
  for (std::size_t cells : schema.pair_lag_cells)
    result.meta_vec["pair_lags"].push_back(static_cast<double>(cells) * h);
  return result;
}

// ---- Snapshot dump (cmd_simulate) ---------------------------------------

namespace {

class DumpVisitor : public ReplicateVisitor {
 public:
  DumpVisitor(const SimulateOptions& options, std::uint64_t seed,
              std::size_t replicate)
      : options_(options), seed_(seed), replicate_(replicate) {}

  void on_snapshot(const Snapshot& snap) override {
    char name[128];
    std::snprintf(name, sizeof(name), "snap_seed%llu_rep%04zu_t%.4f.%s",
                  static_cast<unsigned long long>(seed_), replicate_, snap.t,
                  options_.binary ? "bin" : "csv");
    const std::filesystem::path path =
        std::filesystem::path(options_.out_dir) / "snapshots" / name;
    std::ofstream os(path, options_.binary ? std::ios::binary : std::ios::out);
    if (!os) throw ValidationError("simulate: cannot open " + path.string());
    const std::size_t n = snap.xbar.size();
    if (options_.binary) {
      os.write("GMCSNAP1", 8);
      const std::uint64_t count = n;
      os.write(reinterpret_cast<const char*>(&count), sizeof(count));
      os.write(reinterpret_cast<const char*>(snap.xbar.data()),
               static_cast<std::streamsize>(n * sizeof(double)));
      os.write(reinterpret_cast<const char*>(snap.barrier_max.data()),
               static_cast<std::streamsize>(n * sizeof(double)));
      return;
    }
    os << "index,xbar,barrier_max\n";
    char line[96];
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", i, snap.xbar[i],
                    snap.barrier_max[i]);
      os << line;
    }
  }

 private:
  const SimulateOptions& options_;
  std::uint64_t seed_;
  std::size_t replicate_;
};

}  // namespace

void run_simulate(const ExperimentConfig& config, const SimulateOptions& options) {
  config.validate();
  const ScaleSchedule schedule =
      make_schedule(config.t_max, config.max_step, config.snapshots);
  FieldSampler sampler(config.grid, schedule, config.kernel,
                       {config.bridge_refine});
  std::filesystem::create_directories(std::filesystem::path(options.out_dir) /
                                      "snapshots");
  if (options.dump_tables) {
    const auto dir = std::filesystem::path(options.out_dir) / "tables";
    std::filesystem::create_directories(dir);
    const BumpProfile& profile = BumpProfile::standard(config.kernel.dim);
    for (double t : config.snapshots) {
      const CovarianceTable tab = build_kbar_table(t, config.kernel, profile);
      std::ofstream os(dir / fmt("kbar_t%g.csv", t));
      tab.dump_csv(os);
    }
    const CovarianceTable kt =
        build_kt_table(config.t_max, config.kernel, profile);
    std::ofstream os(dir / "k_t.csv");
    kt.dump_csv(os);
  }
  const std::size_t threads = config.effective_threads();
  std::vector<std::unique_ptr<WorkerContext>> contexts;
  for (std::size_t w = 0; w < threads; ++w)
    contexts.push_back(std::make_unique<WorkerContext>(config.grid));
  parallel_replicates(options.replicates, threads, [&](std::size_t w, std::size_t r) {
    DumpVisitor visitor(options, config.seed, r);
    sampler.run_replicate(config.seed, r, visitor, *contexts[w]);
  });
}

}  // namespace gmc
