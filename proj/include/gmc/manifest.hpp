#pragma once

#include <string>

#include "gmc/harness.hpp"

namespace gmc {

// Parsed run manifest: strict schema, unknown fields rejected, version
// mismatch is an error.
struct Manifest {
  ExperimentConfig config;
  std::string out_dir = "out";
  bool plots = true;
  SimulateOptions simulate;
  std::string source_path;
  std::string hash;  // FNV-1a of the manifest bytes, hex
};

Manifest load_manifest(const std::string& path);

// Applies CLI overrides after parsing.
void apply_overrides(Manifest& manifest, const std::string& out_dir, int threads,
                     long long seed_override, const std::string& gate_policy);

}  // namespace gmc
