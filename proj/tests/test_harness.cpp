#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gmc/errors.hpp"
#include "gmc/harness.hpp"
#include "gmc/manifest.hpp"
#include "gmc/measures.hpp"
#include "gmc/report.hpp"
#include "gmc/stats.hpp"

using namespace gmc;
namespace fs = std::filesystem;

namespace {

// Desk-sized configuration for fast smoke runs.
ExperimentConfig smoke_config() {
  ExperimentConfig c;
  c.grid = GridSpec{1, 512, 2.0};
  c.t_max = 2.0;
  c.snapshots = {1.0, 2.0};
  c.qs = {1.0, 2.0};
  c.subcritical_betas = {0.5, 0.25};
  c.subcritical_q = 2.0;
  c.replicates = 300;
  c.seed = 424242;
  c.threads = 2;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("gmc_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config validation") {
  ExperimentConfig c = smoke_config();
  c.replicates = 50;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = smoke_config();
  c.qs = {-1.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = smoke_config();
  c.subcritical_betas = {2.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_NOTHROW(smoke_config().validate());
}

TEST_CASE("core campaign determinism and thread invariance") {
  ExperimentConfig c = smoke_config();
  c.replicates = 120;
  c.threads = 1;
  const CampaignResult a = run_core_campaign(c);
  c.threads = 2;
  const CampaignResult b = run_core_campaign(c);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t r = 0; r < a.rows.size(); ++r) CHECK(a.rows[r] == b.rows[r]);
}

TEST_CASE("core campaign and experiments at smoke scale") {
  const ExperimentConfig c = smoke_config();
  const CampaignResult core = run_core_campaign(c);
  REQUIRE(core.rows.size() == c.replicates);

  SUBCASE("martingale means pass at their own scale") {
    const RunRecord rec = experiment_derivative(c, core);
    int mean_checks = 0;
    for (const auto& v : rec.verdicts) {
      if (v.name.rfind("martingale_mean", 0) == 0) {
        CHECK(v.status == "PASS");
        ++mean_checks;
      }
      if (v.name == "derivative_identity_relerr") CHECK(v.status == "PASS");
    }
    CHECK(mean_checks == 4);  // two q, two t
  }

  SUBCASE("one point identity passes") {
    const RunRecord rec = experiment_seneta_heyde(c, core);
    for (const auto& v : rec.verdicts)
      if (v.name.rfind("one_point_identity", 0) == 0) CHECK(v.status == "PASS");
  }

  SUBCASE("field statistics pass") {
    const RunRecord rec = experiment_field_stats(c, core);
    for (const auto& v : rec.verdicts)
      if (v.status != "REPORT") CHECK(v.status == "PASS");
  }

  SUBCASE("subcritical weight normalization") {
    // E[M_t^alpha(E)] = lambda(E) for the untruncated field at any alpha.
    const MeanSe ms = mean_se(core.column("Mfdlo_t2"));
    CHECK(std::abs(ms.mean - 1.0) <= 5.0 * ms.se);
  }

  SUBCASE("coincidence identity holds per replicate") {
    for (double v : core.column("coincide_ok")) CHECK(v == 1.0);
  }

  SUBCASE("tail diagnostic is monotone") {
    const RunRecord rec = experiment_tail_diagnostic(c, core);
    bool saw = false;
    for (const auto& v : rec.verdicts)
      if (v.name == "tail_monotone_violations") {
        CHECK(v.status == "PASS");
        saw = true;
      }
    CHECK(saw);
  }

  SUBCASE("exit codes aggregate verdict severity") {
    RunRecord rec;
    rec.verdicts.push_back(report_value("a", 1.0));
    CHECK(rec.exit_code() == 0);
    rec.verdicts.push_back({"b", "INCONCLUSIVE", 0, 0, 0, ""});
    CHECK(rec.exit_code() == 4);
    rec.verdicts.push_back({"c", "FAIL", 0, 0, 0, ""});
    CHECK(rec.exit_code() == 1);
  }
}

TEST_CASE("seed stability: no 3se pass flips to 5se fail") {
  ExperimentConfig a = smoke_config();
  const CampaignResult core_a = run_core_campaign(a);
  const RunRecord rec_a = experiment_derivative(a, core_a);

  ExperimentConfig b = smoke_config();
  b.seed = 171717;
  b.se_gate = 5.0;
  const CampaignResult core_b = run_core_campaign(b);
  const RunRecord rec_b = experiment_derivative(b, core_b);

  for (const auto& va : rec_a.verdicts) {
    if (va.status != "PASS") continue;
    for (const auto& vb : rec_b.verdicts)
      if (vb.name == va.name) CHECK(vb.status != "FAIL");
  }
}

TEST_CASE("gauge campaign smoke") {
  ExperimentConfig c = smoke_config();
  c.gauge_t = 2.0;
  c.gauge_replicates = 250;
  c.gauge_k_max = 4;
  c.gauge_windows = {64, 128};
  const CampaignResult coarse = run_gauge_campaign(c, 64, 1);
  const CampaignResult fine = run_gauge_campaign(c, 128, 2);
  const RunRecord rec = experiment_moment_gauge(c, coarse, fine);
  bool saw_gauge = false;
  for (const auto& v : rec.verdicts)
    if (v.name == "gauge_C_coarse") {
      CHECK(v.observed > 0.0);
      saw_gauge = true;
    }
  CHECK(saw_gauge);
}

TEST_CASE("formula suite at reduced path count") {
  ExperimentConfig c = smoke_config();
  c.path_count = 20000;
  c.cm_replicates = 2000;
  const RunRecord rec = experiment_formula_suite(c);
  int gated = 0, passed = 0;
  for (const auto& v : rec.verdicts) {
    if (v.status != "REPORT") ++gated;
    if (v.status == "PASS") ++passed;
  }
  CHECK(gated == 17);  // 9 bm-max + 3 bridge + 4 drift + 1 tilt
  CHECK(passed == gated);
}

TEST_CASE("manifest parsing") {
  const fs::path dir = temp_dir("manifest");
  const fs::path good = dir / "good.json";
  std::ofstream(good) << R"({
    "version": 1,
    "out_dir": ")" << (dir / "out").string() << R"(",
    "seed": 7,
    "replicates": 150,
    "grid": {"points_per_side": 512},
    "schedule": {"t_max": 2.0, "snapshots": [1.0, 2.0]},
    "qs": [1.0, 2.0],
    "gate_policy": "5se",
    "simulate": {"replicates": 2, "format": "csv", "dump_tables": true}
  })";
  const Manifest m = load_manifest(good.string());
  CHECK(m.config.seed == 7);
  CHECK(m.config.replicates == 150);
  CHECK(m.config.se_gate == 5.0);
  CHECK(m.config.grid.points_per_side == 512);
  CHECK(m.simulate.dump_tables);
  CHECK(m.hash.size() == 16);

  SUBCASE("unknown fields rejected") {
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << R"({"version": 1, "unknown_thing": 3})";
    CHECK_THROWS_AS(load_manifest(bad.string()), ValidationError);
    const fs::path bad2 = dir / "bad2.json";
    std::ofstream(bad2) << R"({"version": 1, "kernel": {"eta3": 1.0}})";
    CHECK_THROWS_AS(load_manifest(bad2.string()), ValidationError);
  }
  SUBCASE("version mismatch rejected") {
    const fs::path bad = dir / "badv.json";
    std::ofstream(bad) << R"({"version": 2})";
    CHECK_THROWS_AS(load_manifest(bad.string()), ValidationError);
    const fs::path none = dir / "nov.json";
    std::ofstream(none) << R"({"seed": 3})";
    CHECK_THROWS_AS(load_manifest(none.string()), ValidationError);
  }
  SUBCASE("overrides") {
    Manifest mm = load_manifest(good.string());
    apply_overrides(mm, (dir / "other").string(), 3, 99, "report-only");
    CHECK(mm.config.threads == 3);
    CHECK(mm.config.seed == 99);
    CHECK(mm.config.report_only);
    CHECK(mm.out_dir == (dir / "other").string());
  }
}

TEST_CASE("simulate writes reproducible snapshots") {
  ExperimentConfig c = smoke_config();
  c.grid = GridSpec{1, 256, 2.0};
  c.t_max = 1.0;
  c.snapshots = {0.5, 1.0};
  const fs::path dir = temp_dir("simulate");

  SimulateOptions opt;
  opt.out_dir = (dir / "a").string();
  opt.replicates = 2;
  opt.dump_tables = true;
  run_simulate(c, opt);
  opt.out_dir = (dir / "b").string();
  run_simulate(c, opt);

  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a" / "snapshots")) {
    const fs::path other = dir / "b" / "snapshots" / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    ++files;
  }
  CHECK(files == 4);  // 2 replicates x 2 snapshots
  CHECK(fs::exists(dir / "a" / "tables" / "k_t.csv"));

  SUBCASE("binary format carries the magic and payload") {
    SimulateOptions bin;
    bin.out_dir = (dir / "bin").string();
    bin.replicates = 1;
    bin.binary = true;
    run_simulate(c, bin);
    bool saw = false;
    for (const auto& entry : fs::directory_iterator(dir / "bin" / "snapshots")) {
      const std::string bytes = slurp(entry.path());
      REQUIRE(bytes.size() == 8 + 8 + 2 * 256 * sizeof(double));
      CHECK(bytes.compare(0, 8, "GMCSNAP1") == 0);
      saw = true;
    }
    CHECK(saw);
  }
}

TEST_CASE("record writing and report rendering") {
  const fs::path dir = temp_dir("report");
  ExperimentConfig c = smoke_config();
  c.path_count = 20000;
  c.cm_replicates = 1500;
  RunRecord rec = experiment_formula_suite(c);
  write_record(dir.string(), rec, "deadbeef00000000", true);
  CHECK(fs::exists(dir / "formula_suite_summary.csv"));
  CHECK(fs::exists(dir / "formula_suite_verdicts.json"));

  // Add a record with gap summaries so an SVG is produced.
  const CampaignResult core = run_core_campaign(c);
  write_record(dir.string(), experiment_seneta_heyde(c, core), "deadbeef00000000",
               true);
  CHECK(fs::exists(dir / "seneta_heyde.svg"));

  CHECK(render_report(dir.string()) == 2);
  const std::string first = slurp(dir / "report.md");
  const std::string svg1 = slurp(dir / "seneta_heyde.svg");
  CHECK(render_report(dir.string()) == 2);
  CHECK(slurp(dir / "report.md") == first);       // idempotent bytes
  CHECK(slurp(dir / "seneta_heyde.svg") == svg1);
  CHECK(first.find("formula_suite") != std::string::npos);

  SUBCASE("empty directory yields nothing") {
    const fs::path empty = temp_dir("empty");
    CHECK(render_report(empty.string()) == 0);
  }
}

TEST_CASE("mollified campaign smoke") {
  ExperimentConfig c = smoke_config();
  c.mollified_grid = GridSpec{1, 2048, 2.0};
  c.epsilons = {0.25, 0.125};
  c.mollified_q = 2.0;
  c.replicates = 150;
  const CampaignResult moll = run_mollified_campaign(c);
  REQUIRE(moll.rows.size() == 150);
  const RunRecord rec = experiment_mollified(c, moll);
  for (const auto& v : rec.verdicts) {
    if (v.name.rfind("mollified_var", 0) == 0) CHECK(v.status == "PASS");
    if (v.name.rfind("tail_variance", 0) == 0) CHECK(v.status == "PASS");
  }
}
