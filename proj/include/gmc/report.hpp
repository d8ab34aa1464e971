#pragma once

#include <string>

#include "gmc/harness.hpp"

namespace gmc {

// Persists a run record: per-replicate CSV, summary CSV, verdict JSON and
// (optionally) an SVG gap plot. Wall-clock goes to a separate timing file
// so everything else is byte-reproducible from (manifest, seed).
void write_record(const std::string& out_dir, const RunRecord& record,
                  const std::string& manifest_hash, bool plots);

// Renders summary CSVs and verdict JSONs in a run directory into report.md
// plus one SVG per experiment with gap data. Idempotent. Returns the number
// of experiments found.
int render_report(const std::string& run_dir);

}  // namespace gmc
