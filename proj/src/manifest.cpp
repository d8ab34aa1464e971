#include "gmc/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gmc/errors.hpp"

namespace gmc {
namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ValidationError("manifest: " + where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ValidationError("manifest: unknown field '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("manifest: field '" + key + "' has the wrong type");
  }
}

GridSpec parse_grid(const json& j, const GridSpec& defaults, const std::string& where) {
  require_keys(j, where, {"dim", "points_per_side", "box_side"});
  GridSpec g = defaults;
  g.dim = get_or<int>(j, "dim", g.dim);
  g.points_per_side = get_or<std::size_t>(j, "points_per_side", g.points_per_side);
  g.box_side = get_or<double>(j, "box_side", g.box_side);
  return g;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("manifest: cannot open " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  const std::string bytes = buffer.str();
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: parse error: ") + e.what());
  }

  require_keys(j, "manifest",
               {"version", "out_dir", "seed", "threads", "gate_policy", "replicates",
                "kernel", "grid", "schedule", "qs", "sets", "subcritical", "mollified",
                "gauge", "formula", "fd_dalpha", "bridge_refine", "simulate", "plots"});
  if (!j.contains("version") || !j.at("version").is_number_integer() ||
      j.at("version").get<int>() != 1)
    throw ValidationError("manifest: version must be the integer 1");

  Manifest m;
  m.source_path = path;
  m.hash = fnv1a_hex(bytes);
  ExperimentConfig& c = m.config;

  m.out_dir = get_or<std::string>(j, "out_dir", m.out_dir);
  m.plots = get_or<bool>(j, "plots", m.plots);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.threads = get_or<int>(j, "threads", c.threads);
  c.replicates = get_or<std::size_t>(j, "replicates", c.replicates);
  c.fd_dalpha = get_or<double>(j, "fd_dalpha", c.fd_dalpha);
  c.bridge_refine = get_or<bool>(j, "bridge_refine", c.bridge_refine);

  const std::string policy = get_or<std::string>(j, "gate_policy", "3se");
  if (policy == "3se") {
    c.se_gate = 3.0;
  } else if (policy == "5se") {
    c.se_gate = 5.0;
  } else if (policy == "report-only") {
    c.report_only = true;
  } else {
    throw ValidationError("manifest: gate_policy must be 3se, 5se or report-only");
  }

  if (j.contains("kernel")) {
    const json& k = j.at("kernel");
    require_keys(k, "kernel", {"eta1", "eta2", "dim", "k0_constant"});
    c.kernel.eta1 = get_or<double>(k, "eta1", c.kernel.eta1);
    c.kernel.eta2 = get_or<double>(k, "eta2", c.kernel.eta2);
    c.kernel.dim = get_or<int>(k, "dim", c.kernel.dim);
    c.kernel.k0_constant = get_or<double>(k, "k0_constant", c.kernel.k0_constant);
  }
  if (j.contains("grid")) c.grid = parse_grid(j.at("grid"), c.grid, "grid");
  c.grid.dim = c.kernel.dim;
  c.mollified_grid.dim = 1;

  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    require_keys(s, "schedule", {"t_max", "max_step", "snapshots"});
    c.t_max = get_or<double>(s, "t_max", c.t_max);
    c.max_step = get_or<double>(s, "max_step", c.max_step);
    if (s.contains("snapshots"))
      c.snapshots = s.at("snapshots").get<std::vector<double>>();
  }
  if (j.contains("qs")) c.qs = j.at("qs").get<std::vector<double>>();

  if (j.contains("sets")) {
    const json& sets = j.at("sets");
    if (!sets.is_array() || sets.size() != 1)
      throw ValidationError("manifest: sets must contain exactly one set");
    const json& s = sets.at(0);
    require_keys(s, "sets[0]", {"id", "boxes"});
    c.set_id = get_or<std::string>(s, "id", "set0");
    c.set_boxes.clear();
    for (const auto& b : s.at("boxes")) {
      if (!b.is_array() || (b.size() != 2 && b.size() != 4))
        throw ValidationError("manifest: each box needs 2 (d=1) or 4 (d=2) bounds");
      std::array<double, 4> box{0, 0, 0, 0};
      for (std::size_t i = 0; i < b.size(); ++i) box[i] = b.at(i).get<double>();
      c.set_boxes.push_back(box);
    }
  }

  if (j.contains("subcritical")) {
    const json& s = j.at("subcritical");
    require_keys(s, "subcritical", {"betas", "q"});
    if (s.contains("betas"))
      c.subcritical_betas = s.at("betas").get<std::vector<double>>();
    c.subcritical_q = get_or<double>(s, "q", c.subcritical_q);
  }
  if (j.contains("mollified")) {
    const json& s = j.at("mollified");
    require_keys(s, "mollified", {"epsilons", "q", "grid"});
    if (s.contains("epsilons"))
      c.epsilons = s.at("epsilons").get<std::vector<double>>();
    c.mollified_q = get_or<double>(s, "q", c.mollified_q);
    if (s.contains("grid"))
      c.mollified_grid = parse_grid(s.at("grid"), c.mollified_grid, "mollified.grid");
  }
  if (j.contains("gauge")) {
    const json& s = j.at("gauge");
    require_keys(s, "gauge",
                 {"windows", "t", "q", "replicates", "k_max", "stability"});
    if (s.contains("windows"))
      c.gauge_windows = s.at("windows").get<std::vector<std::size_t>>();
    c.gauge_t = get_or<double>(s, "t", c.gauge_t);
    c.gauge_q = get_or<double>(s, "q", c.gauge_q);
    c.gauge_replicates = get_or<std::size_t>(s, "replicates", c.gauge_replicates);
    c.gauge_k_max = get_or<int>(s, "k_max", c.gauge_k_max);
    c.gauge_stability = get_or<double>(s, "stability", c.gauge_stability);
  }
  if (j.contains("formula")) {
    const json& s = j.at("formula");
    require_keys(s, "formula", {"paths", "cm_replicates"});
    c.path_count = get_or<std::size_t>(s, "paths", c.path_count);
    c.cm_replicates = get_or<std::size_t>(s, "cm_replicates", c.cm_replicates);
  }
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    require_keys(s, "simulate", {"replicates", "format", "dump_tables"});
    m.simulate.replicates = get_or<std::size_t>(s, "replicates", m.simulate.replicates);
    const std::string format = get_or<std::string>(s, "format", "csv");
    if (format == "csv") {
      m.simulate.binary = false;
    } else if (format == "binary") {
      m.simulate.binary = true;
    } else {
      throw ValidationError("manifest: simulate.format must be csv or binary");
    }
    m.simulate.dump_tables = get_or<bool>(s, "dump_tables", m.simulate.dump_tables);
  }
  m.simulate.out_dir = m.out_dir;
  return m;
}

void apply_overrides(Manifest& manifest, const std::string& out_dir, int threads,
                     long long seed_override, const std::string& gate_policy) {
  if (!out_dir.empty()) {
    manifest.out_dir = out_dir;
    manifest.simulate.out_dir = out_dir;
  }
  if (threads > 0) manifest.config.threads = threads;
  if (seed_override >= 0)
    manifest.config.seed = static_cast<std::uint64_t>(seed_override);
  if (!gate_policy.empty()) {
    if (gate_policy == "3se") {
      manifest.config.se_gate = 3.0;
      manifest.config.report_only = false;
    } else if (gate_policy == "5se") {
      manifest.config.se_gate = 5.0;
      manifest.config.report_only = false;
    } else if (gate_policy == "report-only") {
      manifest.config.report_only = true;
    } else {
      throw ValidationError("gate policy must be 3se, 5se or report-only");
    }
  }
}

}  // namespace gmc
