#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "krf/presets.hpp"

int main(int argc, char** argv) {
  CLI::App app{"krflow: numerical laboratory for the radial Kahler-Ricci flow on P^1"};
  app.require_subcommand(1);

  int grid_refine = 1;
  app.add_option("--grid-refine", grid_refine,
                 "global refinement multiplier for stability re-runs")
      ->check(CLI::PositiveNumber);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "run an experiment config (json)");
  run_cmd->add_option("config", config_path, "path to config.json")->required();

  std::string preset_name, out_dir = "out";
  unsigned long seed = 20240801ul;
  auto* preset_cmd = app.add_subcommand("preset", "run a named preset");
  preset_cmd->add_option("name", preset_name, "preset name")->required();
  preset_cmd->add_option("--out", out_dir, "artifact directory");
  preset_cmd->add_option("--seed", seed, "seed for randomized sweeps");

  auto* list_cmd = app.add_subcommand("list-presets", "list the preset registry");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list_cmd->parsed()) {
      for (const auto& [name, desc] : krf::list_presets())
        std::cout << name << "\t" << desc << "\n";
      return 0;
    }
    krf::RunOptions opts;
    opts.grid_refine = grid_refine;
    krf::PresetResult result;
    if (run_cmd->parsed()) {
      std::ifstream in(config_path);
      if (!in) {
        std::cerr << "cannot open " << config_path << "\n";
        return 2;
      }
      krf::json config = krf::json::parse(in);
      if (config.contains("output") && config.at("output").contains("dir"))
        opts.out_dir = config.at("output").at("dir").get<std::string>();
      result = krf::run_config(config, opts);
    } else {
      opts.out_dir = out_dir;
      opts.seed = seed;
      result = krf::run_preset(preset_name, opts);
    }
    for (const auto& v : result.verdicts)
      std::cout << (v.pass ? "[pass] " : "[FAIL] ") << v.id << ": " << v.detail << "\n";
    int fails = 0;
    for (const auto& r : result.reports) {
      const char* tag = r.verdict == krf::Verdict::Holds   ? "holds"
                        : r.verdict == krf::Verdict::Fails ? "FAILS"
                                                           : "skipped";
      std::cout << "  report " << r.id << ": " << tag;
      if (!r.skipped_reason.empty()) std::cout << " (" << r.skipped_reason << ")";
      std::cout << "\n";
      if (!r.passed()) ++fails;
    }
    return result.ok() && fails == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
