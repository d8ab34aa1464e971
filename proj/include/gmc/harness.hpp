#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gmc/grid.hpp"
#include "gmc/kernel.hpp"
#include "gmc/measures.hpp"
#include "gmc/sampler.hpp"

namespace gmc {

// Full configuration of a verification run. Defaults are the gated d=1
// acceptance setup; the manifest can override any field.
struct ExperimentConfig {
  StarScaleParams kernel;

  GridSpec grid{1, 8192, 2.0};
  double t_max = 8.0;
  double max_step = 0.05;
  std::vector<double> snapshots{1.0, 2.0, 4.0, 8.0};

  std::vector<double> qs{1.0, 2.0, 4.0};
  std::vector<std::array<double, 4>> set_boxes{{0.0, 1.0, 0.0, 1.0}};
  std::string set_id = "unit";

  std::vector<double> subcritical_betas{0.5, 0.25, 0.125};
  double subcritical_q = 4.0;

  GridSpec mollified_grid{1, 32768, 2.0};
  std::vector<double> epsilons{0.125, 0.03125, 0.0078125};
  double mollified_q = 2.0;

  std::vector<std::size_t> gauge_windows{1024, 2048};
  double gauge_t = 6.0;
  double gauge_q = 2.0;
  std::size_t gauge_replicates = 4000;
  int gauge_k_max = 7;
  double gauge_stability = 0.25;

  std::size_t replicates = 2000;
  std::uint64_t seed = 20250809;
  std::size_t path_count = 200000;
  std::size_t cm_replicates = 10000;
  double fd_dalpha = 1e-4;

  double se_gate = 3.0;      // tolerance policy: k standard errors
  bool report_only = false;  // downgrade gates to reports
  bool bridge_refine = true;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
  std::size_t effective_threads() const;
};

struct Verdict {
  std::string name;
  std::string status;  // PASS / FAIL / INCONCLUSIVE / REPORT
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

// Tidy per-replicate campaign output: named columns, one row per replicate,
// plus numeric metadata recorded at build time (expected covariances,
// probe lags, normalizations).
struct CampaignResult {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> meta;
  std::map<std::string, std::vector<double>> meta_vec;

  std::size_t col(const std::string& name) const;  // throws if missing
  std::vector<double> column(const std::string& name) const;
};

struct RunRecord {
  std::string experiment;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> replicate_columns;
  std::vector<std::vector<double>> replicate_rows;
  struct Summary {
    std::string statistic;
    double param = 0.0;
    double param2 = 0.0;
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
  };
  std::vector<Summary> summaries;
  std::vector<Verdict> verdicts;

  // 0 all gated PASS, 1 any FAIL, 4 any INCONCLUSIVE (and no FAIL).
  int exit_code() const;
};

// ---- Campaigns -------------------------------------------------------

// Shared field campaign on the core grid: per-replicate measure values at
// every snapshot level, finite-difference derivative data, subcritical
// weights at the final level, probe-point fields, and the window barrier
// statistic. Feeds several experiments on common random numbers.
CampaignResult run_core_campaign(const ExperimentConfig& config);

// Mollified campaign: renormalized truncated mollified measures for each
// epsilon under two distinct mollifiers, the derivative target at the
// final level, and cross-covariance probes.
CampaignResult run_mollified_campaign(const ExperimentConfig& config);

// Small-grid campaign for gauge-function fits at a given window resolution.
CampaignResult run_gauge_campaign(const ExperimentConfig& config, std::size_t window,
                                  std::uint64_t seed_salt);

// ---- Experiments -----------------------------------------------------

RunRecord experiment_field_stats(const ExperimentConfig& config,
                                 const CampaignResult& core);
RunRecord experiment_derivative(const ExperimentConfig& config,
                                const CampaignResult& core);
RunRecord experiment_seneta_heyde(const ExperimentConfig& config,
                                  const CampaignResult& core);
RunRecord experiment_subcritical(const ExperimentConfig& config,
                                 const CampaignResult& core);
RunRecord experiment_tail_diagnostic(const ExperimentConfig& config,
                                     const CampaignResult& core);
RunRecord experiment_mollified(const ExperimentConfig& config,
                               const CampaignResult& moll);
RunRecord experiment_moment_gauge(const ExperimentConfig& config,
                                  const CampaignResult& coarse,
                                  const CampaignResult& fine);
RunRecord experiment_formula_suite(const ExperimentConfig& config);

// Runs an experiment by name, executing the campaigns it needs.
// Known names: field_stats, derivative_convergence, seneta_heyde,
// subcritical_limit, mollified_convergence, moment_and_gauge,
// formula_suite, tail_diagnostic.
RunRecord run_experiment(const std::string& name, const ExperimentConfig& config);
std::vector<std::string> experiment_names();
// False for experiments that only run in one dimension.
bool experiment_supported(const std::string& name, const ExperimentConfig& config);

// ---- Verdict helpers ---------------------------------------------------

Verdict gate_close(const std::string& name, double observed, double target,
                   double se, double k, bool report_only);
Verdict gate_upper(const std::string& name, double observed, double bound,
                   bool report_only);
// Paired ladder gate on common random numbers: PASS when every successive
// per-replicate gap difference is negative beyond k standard errors, FAIL
// when one increases significantly, INCONCLUSIVE otherwise.
Verdict gate_decreasing(const std::string& name,
                        const std::vector<std::vector<double>>& gap_ladder,
                        double k, bool report_only);
Verdict report_value(const std::string& name, double observed, double expected = 0.0);

// Field snapshot dump (cmd_simulate): one file per (replicate, snapshot).
struct SimulateOptions {
  std::string out_dir;
  bool binary = false;
  bool dump_tables = false;
  std::size_t replicates = 1;
};
void run_simulate(const ExperimentConfig& config, const SimulateOptions& options);

}  // namespace gmc
