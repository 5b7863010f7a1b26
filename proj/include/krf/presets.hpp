#pragma once

#include "krf/io.hpp"

namespace krf {

struct RunOptions {
  std::string out_dir = "out";
  unsigned long seed = 20240801ul;
  int grid_refine = 1;  // global refinement multiplier for stability re-runs
  bool write_artifacts = true;
};

struct CriterionVerdict {
  std::string id;
  bool pass = false;
  std::string detail;
};

struct PresetResult {
  std::string name;
  std::vector<CriterionVerdict> verdicts;
  std::vector<EstimateReport> reports;
  std::map<std::string, std::string> table_hashes;
  double wall_seconds = 0.0;

  bool ok() const;
};

/// Static registry: name and one-line description of each preset.
std::vector<std::pair<std::string, std::string>> list_presets();

/// The canned configuration a preset runs with (echoed into the manifest).
json preset_config(const std::string& name);

PresetResult run_preset(const std::string& name, const RunOptions& opts);

/// Configuration-driven entry point.  Configs with a "preset" field dispatch
/// to the preset driver; plain configs run a single flow plus the listed
/// checks.  Artifacts: manifest.json, reports/*.json, tables/*.csv.
PresetResult run_config(const json& config, const RunOptions& opts);

/// Strict validation: schema, referenced check ids, resolvable paths.
void validate_config(const json& config);

}  // namespace krf
