#include "krf/io.hpp"

#include <cstdio>
#include <fstream>

namespace krf {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fnv1a64(const std::string& bytes) {
  unsigned long long h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", h);
  return buf;
}

static std::string write_text(const std::filesystem::path& file, const std::string& body) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << body;
  out.close();
  return fnv1a64(body);
}

std::string write_csv(const std::filesystem::path& file,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::string body;
  for (size_t i = 0; i < header.size(); ++i) {
    body += header[i];
    body += i + 1 < header.size() ? ',' : '\n';
  }
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      body += format_double(row[i]);
      body += i + 1 < row.size() ? ',' : '\n';
    }
  }
  return write_text(file, body);
}

std::string write_trajectory_csv(const std::filesystem::path& file,
                                 const FlowTrajectory& traj, const BackgroundGeometry& bg,
                                 const ClassPath& path) {
  std::vector<std::vector<double>> rows;
  for (const auto& st : traj.states) {
    auto dens = path.theta_density(st.t);
    auto uxx = d2(st.u);
    for (int i = 0; i < st.u.size(); ++i) {
      // Extrapolated limits may be degenerate at the pole-side boundary.
      double ratio = (dens[size_t(i)] + uxx[size_t(i)]) / bg.g0_density[size_t(i)];
      double logd = ratio > 0 ? std::log(ratio) : std::nan("");
      rows.push_back({st.t, st.u.grid.node(i), st.u.values[size_t(i)], logd, ratio});
    }
  }
  return write_csv(file, {"t", "s", "u", "log_density", "trace_ratio"}, rows);
}

std::string write_profile_csv(const std::filesystem::path& file, const RadialProfile& p) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < p.size(); ++i)
    rows.push_back({p.grid.node(i), p.values[size_t(i)]});
  return write_csv(file, {"s", "value"}, rows);
}

RadialProfile read_profile_csv(const std::filesystem::path& file, double slope_minus,
                               double slope_plus) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> ss, vv;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("bad profile csv row");
    ss.push_back(std::stod(line.substr(0, comma)));
    vv.push_back(std::stod(line.substr(comma + 1)));
  }
  if (ss.size() < 3) throw std::runtime_error("profile csv too short");
  SGrid g = SGrid::uniform(ss.front(), ss.back(), int(ss.size()));
  RadialProfile p{g, vv, slope_minus, slope_plus};
  p.check_finite("profile csv");
  return p;
}

json report_to_json(const EstimateReport& r) {
  json j;
  j["id"] = r.id;
  j["verdict"] = r.verdict == Verdict::Holds   ? "holds"
                 : r.verdict == Verdict::Fails ? "fails"
                                               : "skipped";
  if (!r.skipped_reason.empty()) j["skipped_reason"] = r.skipped_reason;
  j["margin"] = r.margin;
  j["witness"] = {{"t", r.witness_t}, {"s", r.witness_s}};
  j["refinement_stable"] = r.refinement_stable;
  json c = json::object();
  for (const auto& [k, v] : r.constants) c[k] = v;
  j["constants"] = c;
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

}  // namespace krf
