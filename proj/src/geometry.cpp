#include "krf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace krf {

double BackgroundGeometry::integrate(const std::vector<double>& f) const {
  if (int(f.size()) != grid().n_points)
    throw std::invalid_argument("integrate: size mismatch");
  const double h = grid().spacing();
  double acc = 0;
  for (size_t i = 0; i < f.size(); ++i) acc += f[i] * g0_density[i] * h;
  return acc;
}

static std::vector<double> point_density(const RadialProfile& g,
                                         const std::vector<double>& gd) {
  // Interior d2 values are pointwise O(h^2); boundary cells are lumped, so
  // replace them by log-linear extrapolation of the interior profile.
  const int n = int(gd.size());
  std::vector<double> out = gd;
  for (int i = 1; i + 1 < n; ++i)
    if (!(gd[size_t(i)] > 0))
      throw std::invalid_argument("degenerate metric: g'' <= 0 at an interior node");
  out[0] = std::exp(2.0 * std::log(gd[1]) - std::log(gd[2]));
  out[size_t(n) - 1] =
      std::exp(2.0 * std::log(gd[size_t(n) - 2]) - std::log(gd[size_t(n) - 3]));
  return out;
}

RadialProfile ricci_potential(const RadialProfile& g) {
  const auto gd = d2(g);
  const int n = int(gd.size());
  for (int i = 1; i + 1 < n; ++i)
    if (!(gd[size_t(i)] > 0))
      throw std::invalid_argument("ricci_potential: metric degenerate (g'' <= 0)");
  const auto pt = point_density(g, gd);
  RadialProfile r = g;
  for (int i = 0; i < n; ++i)
    r.values[size_t(i)] = g.grid.node(i) - std::log(pt[size_t(i)]);
  const double h = g.grid.spacing();
  r.slope_minus = (r.values[2] - r.values[1]) / h;
  r.slope_plus = (r.values[size_t(n) - 2] - r.values[size_t(n) - 3]) / h;
  r.check_finite("ricci potential");
  return r;
}

std::vector<double> ricci_density_of(const RadialProfile& g,
                                     const std::vector<double>& g_density) {
  // Gauss curvature ratio K = -(log g'')'' / g'' gives the Ricci measure
  // K * g'' ds on the same lumped cells as g_density.
  const int n = int(g_density.size());
  const double h = g.grid.spacing();
  std::vector<double> ell(static_cast<size_t>(n));
  for (int i = 1; i + 1 < n; ++i) ell[size_t(i)] = std::log(g_density[size_t(i)]);
  ell[0] = 2 * ell[1] - ell[2];
  ell[size_t(n) - 1] = 2 * ell[size_t(n) - 2] - ell[size_t(n) - 3];
  std::vector<double> K(static_cast<size_t>(n));
  for (int i = 1; i + 1 < n; ++i) {
    double d2ell = (ell[size_t(i) - 1] - 2 * ell[size_t(i)] + ell[size_t(i) + 1]) / (h * h);
    K[size_t(i)] = -d2ell / g_density[size_t(i)];
  }
  K[0] = K[1];
  K[size_t(n) - 1] = K[size_t(n) - 2];
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[size_t(i)] = K[size_t(i)] * g_density[size_t(i)];
  return out;
}

BackgroundGeometry make_fubini_study(double V, const SGrid& grid) {
  if (!(V > 0)) throw std::invalid_argument("make_fubini_study: V must be > 0");
  BackgroundGeometry bg;
  bg.g0 = RadialProfile::from_function(
      grid, [V](double s) { return V * softplus(s); }, 0.0, V);
  bg.g0_density = d2(bg.g0);
  for (double v : bg.g0_density)
    if (!(v > 0)) throw std::logic_error("fubini-study density not positive");
  bg.g0_point = point_density(bg.g0, bg.g0_density);
  // Ricci data in closed form: r = s - log g0'' = (2/V) g0 - log V, so the
  // discrete Ricci measure is exactly (2/V) g0_density, lumping included.
  bg.ricci_hat = (2.0 / V) * bg.g0 + (-std::log(V));
  bg.ricci_density.resize(bg.g0_density.size());
  for (size_t i = 0; i < bg.g0_density.size(); ++i)
    bg.ricci_density[i] = (2.0 / V) * bg.g0_density[i];
  set_eta(bg, EtaKind::Zero, 0.0);
  return bg;
}

void set_eta(BackgroundGeometry& bg, EtaKind kind, double factor) {
  switch (kind) {
    case EtaKind::Zero:
      bg.eta_hat = RadialProfile::zero(bg.grid());
      bg.eta_density.assign(size_t(bg.grid().n_points), 0.0);
      break;
    case EtaKind::ProportionalRicci:
      bg.eta_hat = factor * bg.ricci_hat;
      bg.eta_density.resize(bg.ricci_density.size());
      for (size_t i = 0; i < bg.eta_density.size(); ++i)
        bg.eta_density[i] = factor * bg.ricci_density[i];
      break;
    case EtaKind::ProportionalOmega:
      bg.eta_hat = factor * bg.g0;
      bg.eta_density.resize(bg.g0_density.size());
      for (size_t i = 0; i < bg.eta_density.size(); ++i)
        bg.eta_density[i] = factor * bg.g0_density[i];
      break;
  }
}

RadialProfile ClassPath::theta_potential(double t) const {
  return bg->g0 + t * chi;
}

std::vector<double> ClassPath::theta_density(double t) const {
  std::vector<double> out = bg->g0_density;
  for (size_t i = 0; i < out.size(); ++i) out[i] += t * chi_density[i];
  return out;
}

ClassPath make_class_path(const BackgroundGeometry& bg) {
  ClassPath p;
  p.bg = &bg;
  p.chi = bg.eta_hat - bg.ricci_hat;
  p.chi_density.resize(bg.g0_density.size());
  for (size_t i = 0; i < p.chi_density.size(); ++i)
    p.chi_density[i] = bg.eta_density[i] - bg.ricci_density[i];
  p.t_max = compute_tmax(bg);
  return p;
}

double compute_tmax(const BackgroundGeometry& bg) {
  const double coeff = bg.mass_eta() - bg.mass_c1();
  if (coeff >= 0) return std::numeric_limits<double>::infinity();
  return bg.mass_omega() / (-coeff);
}

double normalization_window(const BackgroundGeometry& bg, const ClassPath& path) {
  double S = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < bg.g0_density.size(); ++i) {
    const double g = bg.g0_density[i], c = path.chi_density[i];
    if (c > 0) S = std::min(S, g / c);             // theta <= 2 omega
    if (c < 0) S = std::min(S, (g / 3.0) / (-c));  // theta >= (2/3) omega
  }
  return S;
}

}  // namespace krf
