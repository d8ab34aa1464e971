#include "gmc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gmc/errors.hpp"

namespace gmc {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string num(double v, const char* spec = "%.17g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct SummaryRow {
  std::string statistic;
  double param, param2, mean, se;
  std::size_t n;
};

// Minimal self-rendered log-log line chart of gap statistics.
std::string render_gap_svg(const std::string& experiment,
                           const std::vector<SummaryRow>& rows) {
  std::vector<const SummaryRow*> gaps;
  for (const auto& r : rows)
    if (r.statistic.find("gap") != std::string::npos && r.mean > 0.0)
      gaps.push_back(&r);
  if (gaps.empty()) return {};

  std::map<std::string, std::vector<const SummaryRow*>> series;
  for (const SummaryRow* r : gaps)
    series[r->statistic + "_" + num(r->param, "%g")].push_back(r);

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto xval = [](const SummaryRow* r) {
    return r->param2 != 0.0 ? r->param2 : r->param;
  };
  for (const SummaryRow* r : gaps) {
    xmin = std::min(xmin, xval(r));
    xmax = std::max(xmax, xval(r));
    ymin = std::min(ymin, r->mean);
    ymax = std::max(ymax, r->mean);
  }
  if (!(xmax > 0.0 && ymax > 0.0)) return {};
  xmin = std::log10(std::max(xmin, 1e-12));
  xmax = std::log10(xmax) + 1e-9;
  ymin = std::log10(std::max(ymin, 1e-12)) - 0.05;
  ymax = std::log10(ymax) + 0.05;

  const double w = 480, h = 360, ml = 60, mr = 20, mt = 30, mb = 40;
  auto px = [&](double x) {
    return ml + (std::log10(x) - xmin) / std::max(xmax - xmin, 1e-9) * (w - ml - mr);
  };
  auto py = [&](double y) {
    return h - mb -
           (std::log10(std::max(y, 1e-300)) - ymin) /
               std::max(ymax - ymin, 1e-9) * (h - mt - mb);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
     << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" "
     << "font-family=\"monospace\" font-size=\"13\">" << experiment
     << " paired L2 gaps (log-log)</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
     << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
     << h - mb << "\" stroke=\"black\"/>\n";

  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};
  int ci = 0;
  double legend_y = mt + 8;
  for (const auto& [name, srs] : series) {
    const char* color = colors[ci % 6];
    std::ostringstream pts;
    for (const SummaryRow* r : srs)
      pts << num(px(xval(r)), "%.2f") << "," << num(py(r->mean), "%.2f") << " ";
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" "
       << "points=\"" << pts.str() << "\"/>\n";
    for (const SummaryRow* r : srs) {
      os << "<circle cx=\"" << num(px(xval(r)), "%.2f") << "\" cy=\""
         << num(py(r->mean), "%.2f") << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      const double lo = std::max(r->mean - 3.0 * r->se, 1e-300);
      const double hi = r->mean + 3.0 * r->se;
      os << "<line x1=\"" << num(px(xval(r)), "%.2f") << "\" y1=\""
         << num(py(lo), "%.2f") << "\" x2=\"" << num(px(xval(r)), "%.2f")
         << "\" y2=\"" << num(py(hi), "%.2f") << "\" stroke=\"" << color
         << "\" stroke-width=\"1\"/>\n";
    }
    os << "<text x=\"" << w - mr - 170 << "\" y=\"" << num(legend_y, "%.1f")
       << "\" font-family=\"monospace\" font-size=\"11\" fill=\"" << color << "\">"
       << name << "</text>\n";
    legend_y += 14;
    ++ci;
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<SummaryRow> read_summary_csv(const fs::path& path) {
  std::ifstream is(path);
  std::vector<SummaryRow> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string field;
    SummaryRow r;
    std::getline(ss, r.statistic, ',');
    std::getline(ss, field, ',');
    r.param = std::strtod(field.c_str(), nullptr);
    std::getline(ss, field, ',');
    r.param2 = std::strtod(field.c_str(), nullptr);
    std::getline(ss, field, ',');
    r.mean = std::strtod(field.c_str(), nullptr);
    std::getline(ss, field, ',');
    r.se = std::strtod(field.c_str(), nullptr);
    std::getline(ss, field, ',');
    r.n = static_cast<std::size_t>(std::strtoull(field.c_str(), nullptr, 10));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

void write_record(const std::string& out_dir, const RunRecord& record,
                  const std::string& manifest_hash, bool plots) {
  fs::create_directories(out_dir);
  const fs::path base = fs::path(out_dir) / record.experiment;

  if (!record.replicate_rows.empty()) {
    std::ofstream os(base.string() + "_replicates.csv");
    os << "replicate";
    for (const auto& c : record.replicate_columns) os << "," << c;
    os << "\n";
    for (std::size_t r = 0; r < record.replicate_rows.size(); ++r) {
      os << r;
      for (double v : record.replicate_rows[r]) os << "," << num(v);
      os << "\n";
    }
  }

  {
    std::ofstream os(base.string() + "_summary.csv");
    os << "statistic,param,param2,mean,se,n\n";
    for (const auto& s : record.summaries)
      os << s.statistic << "," << num(s.param) << "," << num(s.param2) << ","
         << num(s.mean) << "," << num(s.se) << "," << s.n << "\n";
  }

  {
    ordered_json j;
    j["experiment"] = record.experiment;
    j["seed"] = record.seed;
    j["manifest_hash"] = manifest_hash;
    j["verdicts"] = ordered_json::array();
    for (const auto& v : record.verdicts) {
      ordered_json jv;
      jv["name"] = v.name;
      jv["status"] = v.status;
      jv["observed"] = v.observed;
      jv["expected"] = v.expected;
      jv["tolerance"] = v.tolerance;
      jv["detail"] = v.detail;
      j["verdicts"].push_back(jv);
    }
    std::ofstream os(base.string() + "_verdicts.json");
    os << j.dump(2) << "\n";
  }

  {
    ordered_json j;
    j["wall_seconds"] = record.wall_seconds;
    std::ofstream os(base.string() + "_timing.json");
    os << j.dump(2) << "\n";
  }

  if (plots) {
    std::vector<SummaryRow> rows;
    for (const auto& s : record.summaries)
      rows.push_back({s.statistic, s.param, s.param2, s.mean, s.se, s.n});
    const std::string svg = render_gap_svg(record.experiment, rows);
    if (!svg.empty()) {
      std::ofstream os(base.string() + ".svg");
      os << svg;
    }
  }
}

int render_report(const std::string& run_dir) {
  if (!fs::is_directory(run_dir)) return 0;
  std::vector<std::string> experiments;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = "_verdicts.json";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      experiments.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(experiments.begin(), experiments.end());
  if (experiments.empty()) return 0;

  std::ofstream md(fs::path(run_dir) / "report.md");
  md << "# Verification report\n";
  for (const std::string& exp : experiments) {
    std::ifstream is(fs::path(run_dir) / (exp + "_verdicts.json"));
    nlohmann::json j;
    is >> j;
    md << "\n## " << exp << "\n\n";
    md << "| check | status | observed | expected |\n";
    md << "|---|---|---|---|\n";
    std::size_t pass = 0, fail = 0, inconclusive = 0;
    for (const auto& v : j.at("verdicts")) {
      const std::string status = v.at("status").get<std::string>();
      if (status == "PASS") ++pass;
      if (status == "FAIL") ++fail;
      if (status == "INCONCLUSIVE") ++inconclusive;
      md << "| " << v.at("name").get<std::string>() << " | " << status << " | "
         << num(v.at("observed").get<double>(), "%.6g") << " | "
         << num(v.at("expected").get<double>(), "%.6g") << " |\n";
    }
    md << "\n" << pass << " pass";
    if (fail) md << ", " << fail << " fail";
    if (inconclusive) md << ", " << inconclusive << " inconclusive";
    md << ".\n";

    const fs::path summary = fs::path(run_dir) / (exp + "_summary.csv");
    if (fs::exists(summary)) {
      const std::string svg = render_gap_svg(exp, read_summary_csv(summary));
      if (!svg.empty()) {
        std::ofstream os(fs::path(run_dir) / (exp + ".svg"));
        os << svg;
        md << "\n![gaps](" << exp << ".svg)\n";
      }
    }
  }
  return static_cast<int>(experiments.size());
}

}  // namespace gmc
