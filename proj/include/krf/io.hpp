#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "krf/estimates.hpp"

namespace krf {

using json = nlohmann::ordered_json;

/// Full round-trip precision decimal rendering.
std::string format_double(double v);

/// FNV-1a 64-bit content hash, hex encoded.
std::string fnv1a64(const std::string& bytes);

/// CSV with %.17g numerics; returns the file's content hash.
std::string write_csv(const std::filesystem::path& file,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows);

/// Trajectory table with columns (t, s, u, log_density, trace_ratio).
std::string write_trajectory_csv(const std::filesystem::path& file,
                                 const FlowTrajectory& traj,
                                 const BackgroundGeometry& bg, const ClassPath& path);

/// Two-column (s, value) profile export / import.
std::string write_profile_csv(const std::filesystem::path& file, const RadialProfile& p);
RadialProfile read_profile_csv(const std::filesystem::path& file, double slope_minus,
                               double slope_plus);

json report_to_json(const EstimateReport& r);

}  // namespace krf
