#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& stderr_file = {}) {
  std::string cmd = std::string(GMC_BINARY_PATH) + " " + args + " > /dev/null";
  if (!stderr_file.empty())
    cmd += " 2> " + stderr_file.string();
  else
    cmd += " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("gmc_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_small_manifest(const fs::path& path, const fs::path& out,
                          const std::string& extra = "") {
  std::ofstream(path) << R"({
    "version": 1,
    "out_dir": ")" << out.string() << R"(",
    "seed": 31415,
    "replicates": 120,
    "grid": {"points_per_side": 256},
    "schedule": {"t_max": 1.0, "snapshots": [0.5, 1.0]},
    "qs": [1.0, 2.0],
    "formula": {"paths": 12000, "cm_replicates": 1200},
    "simulate": {"replicates": 2, "format": "csv", "dump_tables": false})"
                      << extra << "\n}";
}

}  // namespace

TEST_CASE("cli validation failures exit with code 2") {
  const fs::path dir = temp_dir("validate");
  CHECK(run_cli("experiment nonsense --manifest /nonexistent.json") == 2);

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << R"({"version": 1, "bogus": true})";
  CHECK(run_cli("simulate --manifest " + bad.string()) == 2);

  write_small_manifest(dir / "ok.json", dir / "out");
  CHECK(run_cli("experiment not_an_experiment --manifest " +
                (dir / "ok.json").string()) == 2);
}

TEST_CASE("simulate is byte reproducible end to end") {
  const fs::path dir = temp_dir("simulate");
  write_small_manifest(dir / "m.json", dir / "outA");
  REQUIRE(run_cli("simulate --manifest " + (dir / "m.json").string()) == 0);
  REQUIRE(run_cli("simulate --manifest " + (dir / "m.json").string() + " --out " +
                  (dir / "outB").string()) == 0);

  int compared = 0;
  for (const auto& entry : fs::directory_iterator(dir / "outA" / "snapshots")) {
    const fs::path other = dir / "outB" / "snapshots" / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    ++compared;
  }
  CHECK(compared == 4);
}

TEST_CASE("unresolvable mollifier surfaces by name with exit 2") {
  const fs::path dir = temp_dir("moll");
  write_small_manifest(dir / "m.json", dir / "out",
                       R"(,
    "mollified": {"epsilons": [0.001], "q": 2.0,
                  "grid": {"points_per_side": 512}})");
  const fs::path err = dir / "stderr.txt";
  CHECK(run_cli("experiment mollified_convergence --manifest " +
                    (dir / "m.json").string(),
                err) == 2);
  CHECK(slurp(err).find("UnresolvableMollifier") != std::string::npos);
}

TEST_CASE("experiment and report round trip") {
  const fs::path dir = temp_dir("roundtrip");
  write_small_manifest(dir / "m.json", dir / "run");
  CHECK(run_cli("experiment formula_suite --manifest " + (dir / "m.json").string()) ==
        0);
  CHECK(fs::exists(dir / "run" / "formula_suite_verdicts.json"));
  CHECK(fs::exists(dir / "run" / "formula_suite_summary.csv"));

  CHECK(run_cli("report --run-dir " + (dir / "run").string()) == 0);
  const std::string report = slurp(dir / "run" / "report.md");
  CHECK(report.find("formula_suite") != std::string::npos);
  CHECK(run_cli("report --run-dir " + (dir / "run").string()) == 0);
  CHECK(slurp(dir / "run" / "report.md") == report);

  SUBCASE("report on an empty directory exits 2") {
    const fs::path empty = temp_dir("reportempty");
    CHECK(run_cli("report --run-dir " + empty.string()) == 2);
  }
}
