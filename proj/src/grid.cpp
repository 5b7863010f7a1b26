#include "krf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace krf {

SGrid SGrid::uniform(double s_min, double s_max, int n_points) {
  if (n_points < 3) throw std::invalid_argument("grid needs at least 3 nodes");
  if (!(s_max > s_min)) throw std::invalid_argument("grid requires s_min < s_max");
  if (!(s_min < 0.0 && s_max > 0.0))
    throw std::invalid_argument("grid must straddle s = 0 (both charts resolved)");
  return SGrid{s_min, s_max, n_points};
}

bool SGrid::same_as(const SGrid& o, double tol) const {
  return n_points == o.n_points && std::abs(s_min - o.s_min) < tol &&
         std::abs(s_max - o.s_max) < tol;
}

SGrid SGrid::refined(int factor) const {
  if (factor < 1) throw std::invalid_argument("refinement factor must be >= 1");
  return SGrid{s_min, s_max, (n_points - 1) * factor + 1};
}

int SGrid::nearest(double s) const {
  int i = int(std::lround((s - s_min) / spacing()));
  return std::clamp(i, 0, n_points - 1);
}

RadialProfile RadialProfile::zero(const SGrid& g) {
  return RadialProfile{g, std::vector<double>(size_t(g.n_points), 0.0), 0.0, 0.0};
}

RadialProfile RadialProfile::constant(const SGrid& g, double c) {
  return RadialProfile{g, std::vector<double>(size_t(g.n_points), c), 0.0, 0.0};
}

RadialProfile RadialProfile::from_function(const SGrid& g,
                                           const std::function<double(double)>& f,
                                           double slope_minus, double slope_plus) {
  RadialProfile p{g, std::vector<double>(size_t(g.n_points)), slope_minus, slope_plus};
  for (int i = 0; i < g.n_points; ++i) p.values[size_t(i)] = f(g.node(i));
  p.check_finite("profile");
  return p;
}

void RadialProfile::check_finite(const std::string& what) const {
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument(what + ": non-finite value");
}

static void require_same_grid(const RadialProfile& a, const RadialProfile& b) {
  if (!a.grid.same_as(b.grid)) throw std::invalid_argument("profiles on mismatched grids");
}

RadialProfile operator+(const RadialProfile& a, const RadialProfile& b) {
  require_same_grid(a, b);
  RadialProfile r = a;
  for (int i = 0; i < r.size(); ++i) r.values[size_t(i)] += b.values[size_t(i)];
  r.slope_minus += b.slope_minus;
  r.slope_plus += b.slope_plus;
  return r;
}

RadialProfile operator-(const RadialProfile& a, const RadialProfile& b) {
  require_same_grid(a, b);
  RadialProfile r = a;
  for (int i = 0; i < r.size(); ++i) r.values[size_t(i)] -= b.values[size_t(i)];
  r.slope_minus -= b.slope_minus;
  r.slope_plus -= b.slope_plus;
  return r;
}

RadialProfile operator*(double c, const RadialProfile& p) {
  RadialProfile r = p;
  for (double& v : r.values) v *= c;
  r.slope_minus *= c;
  r.slope_plus *= c;
  return r;
}

RadialProfile operator+(const RadialProfile& p, double c) {
  RadialProfile r = p;
  for (double& v : r.values) v += c;
  return r;
}

std::vector<double> d2(const RadialProfile& p) {
  const int n = p.size();
  if (n < 3) throw std::invalid_argument("d2 requires at least 3 nodes");
  const double h = p.grid.spacing();
  std::vector<double> out(static_cast<size_t>(n));
  const auto& v = p.values;
  out[0] = (v[1] - v[0] - h * p.slope_minus) / (h * h);
  for (int i = 1; i + 1 < n; ++i)
    out[size_t(i)] = (v[size_t(i) - 1] - 2.0 * v[size_t(i)] + v[size_t(i) + 1]) / (h * h);
  out[size_t(n) - 1] = (h * p.slope_plus - (v[size_t(n) - 1] - v[size_t(n) - 2])) / (h * h);
  return out;
}

double fit_slope(const RadialProfile& p, double s_lo, double s_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int i = 0; i < p.size(); ++i) {
    double s = p.grid.node(i);
    if (s < s_lo || s > s_hi) continue;
    sx += s;
    sy += p.values[size_t(i)];
    sxx += s * s;
    sxy += s * p.values[size_t(i)];
    ++m;
  }
  if (m < 2) throw std::invalid_argument("fit_slope: window contains < 2 nodes");
  double denom = double(m) * sxx - sx * sx;
  return (double(m) * sxy - sx * sy) / denom;
}

double sup_norm(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const RadialProfile& a, const RadialProfile& b) {
  require_same_grid(a, b);
  return max_abs_diff(a.values, b.values);
}

double window_diff(const RadialProfile& a, const RadialProfile& b, double s_lo,
                   double s_hi) {
  require_same_grid(a, b);
  double m = 0;
  for (int i = 0; i < a.size(); ++i) {
    double s = a.grid.node(i);
    if (s < s_lo || s > s_hi) continue;
    m = std::max(m, std::abs(a.values[size_t(i)] - b.values[size_t(i)]));
  }
  return m;
}

double window_max(const SGrid& g, const std::vector<double>& v, double s_lo,
                  double s_hi) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < g.n_points && i < int(v.size()); ++i) {
    double s = g.node(i);
    if (s < s_lo || s > s_hi) continue;
    m = std::max(m, v[size_t(i)]);
  }
  return m;
}

double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double log_add_exp(double a, double b) {
  double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace krf
