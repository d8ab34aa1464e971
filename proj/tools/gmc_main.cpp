#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmc/errors.hpp"
#include "gmc/harness.hpp"
#include "gmc/manifest.hpp"
#include "gmc/report.hpp"

namespace {

int run_simulate_cmd(const std::string& manifest_path, const std::string& out,
                     int threads, long long seed_override) {
  gmc::Manifest m = gmc::load_manifest(manifest_path);
  gmc::apply_overrides(m, out, threads, seed_override, "");
  gmc::run_simulate(m.config, m.simulate);
  std::printf("simulate: wrote %zu replicate(s) under %s/snapshots\n",
              m.simulate.replicates, m.simulate.out_dir.c_str());
  return 0;
}

int run_experiment_cmd(const std::string& name, const std::string& manifest_path,
                       const std::string& out, int threads, long long seed_override,
                       const std::string& gate_policy) {
  gmc::Manifest m = gmc::load_manifest(manifest_path);
  gmc::apply_overrides(m, out, threads, seed_override, gate_policy);

  std::vector<std::string> names;
  if (name == "all") {
    names = gmc::experiment_names();
  } else {
    names.push_back(name);
  }
  int worst = 0;
  for (const std::string& n : names) {
    if (name == "all" && !gmc::experiment_supported(n, m.config)) {
      std::printf("%s: skipped (not available in d=%d)\n", n.c_str(),
                  m.config.kernel.dim);
      continue;
    }
    const gmc::RunRecord rec = gmc::run_experiment(n, m.config);
    gmc::write_record(m.out_dir, rec, m.hash, m.plots);
    const int code = rec.exit_code();
    std::printf("%s: %s (%.1fs)\n", n.c_str(),
                code == 0 ? "PASS" : (code == 1 ? "FAIL" : "INCONCLUSIVE"),
                rec.wall_seconds);
    if (code == 1 || worst == 1)
      worst = 1;
    else
      worst = std::max(worst, code);
  }
  return worst;
}

int run_report_cmd(const std::string& run_dir) {
  const int found = gmc::render_report(run_dir);
  if (found == 0) {
    std::fprintf(stderr, "report: no experiment records in %s\n", run_dir.c_str());
    return 2;
  }
  std::printf("report: rendered %d experiment(s) into %s/report.md\n", found,
              run_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification toolkit for critical Gaussian "
               "multiplicative chaos approximations"};
  app.require_subcommand(1);

  std::string manifest_path, out_dir, gate_policy, experiment_name = "all",
                                                   run_dir;
  int threads = 0;
  long long seed_override = -1;

  CLI::App* sim = app.add_subcommand("simulate", "sample fields and dump snapshots");
  sim->add_option("--manifest", manifest_path, "run manifest (JSON)")->required();
  sim->add_option("--out", out_dir, "output directory override");
  sim->add_option("--threads", threads, "worker pool size (0 = hardware)");
  sim->add_option("--seed-override", seed_override, "replace the manifest seed");

  CLI::App* exp = app.add_subcommand("experiment", "run a verification experiment");
  exp->add_option("name", experiment_name,
                  "experiment name or 'all' (see README for the list)");
  exp->add_option("--manifest", manifest_path, "run manifest (JSON)")->required();
  exp->add_option("--out", out_dir, "output directory override");
  exp->add_option("--threads", threads, "worker pool size (0 = hardware)");
  exp->add_option("--seed-override", seed_override, "replace the manifest seed");
  exp->add_option("--gate-policy", gate_policy, "3se, 5se or report-only");

  CLI::App* rep = app.add_subcommand("report", "render CSVs into SVG plots and markdown");
  rep->add_option("--run-dir", run_dir, "directory with experiment records")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return run_simulate_cmd(manifest_path, out_dir, threads, seed_override);
    if (exp->parsed())
      return run_experiment_cmd(experiment_name, manifest_path, out_dir, threads,
                                seed_override, gate_policy);
    if (rep->parsed()) return run_report_cmd(run_dir);
  } catch (const gmc::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const gmc::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
