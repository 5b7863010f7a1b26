#include "krf/singular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace krf {

LelongMeasurement lelong_number(const RadialProfile& p, double s_lo, double s_hi,
                                double sensitivity_threshold) {
  const SGrid& g = p.grid;
  const double mid = 0.5 * (g.s_min + g.s_max);
  if (!(s_lo >= g.s_min && s_hi <= mid && s_lo < s_hi))
    throw std::invalid_argument("lelong_number: window must lie inside the left half");
  LelongMeasurement m;
  const double w = s_hi - s_lo;
  m.nu = 2.0 * fit_slope(p, s_lo, s_hi);
  double shift = w / 4.0;
  double lo2 = std::max(g.s_min, s_lo - shift);
  double nuL = 2.0 * fit_slope(p, lo2, s_hi - shift);
  double nuR = 2.0 * fit_slope(p, s_lo + shift, std::min(mid, s_hi + shift));
  m.sensitivity = std::max(std::abs(m.nu - nuL), std::abs(m.nu - nuR));
  m.confident = m.sensitivity <= sensitivity_threshold;
  return m;
}

namespace {

// Least-squares endpoint slopes over a few interior-adjacent nodes.
double end_slope_left(const RadialProfile& p, int nfit = 6) {
  const SGrid& g = p.grid;
  int n = std::min(nfit, g.n_points / 4);
  return fit_slope(p, g.node(1), g.node(1 + n));
}
double end_slope_right(const RadialProfile& p, int nfit = 6) {
  const SGrid& g = p.grid;
  int n = std::min(nfit, g.n_points / 4);
  return fit_slope(p, g.node(g.n_points - 2 - n), g.node(g.n_points - 2));
}

}  // namespace

IntegrabilityCertificate skoda_check(const RadialProfile& p, double lambda,
                                     const BackgroundGeometry& bg) {
  if (!(lambda > 0)) throw std::invalid_argument("skoda_check: lambda must be > 0");
  if (!p.grid.same_as(bg.grid()))
    throw std::invalid_argument("skoda_check: grid mismatch");
  IntegrabilityCertificate cert;
  cert.lambda = lambda;

  const double aL = end_slope_left(p);
  const double bR = end_slope_right(p);
  cert.tail_slope = aL;
  // Left tail: integrand ~ e^{(1 - 2 lambda aL) s}; right: ~ e^{-(1 + 2 lambda bR) s}.
  const double exL = 1.0 - 2.0 * lambda * aL;
  const double exR = 1.0 + 2.0 * lambda * bR;
  cert.tail_exponent = exL;
  const double band = 0.02;
  cert.boundary_case = std::abs(exL) <= band || std::abs(exR) <= band;
  if (exL <= 0 || exR <= 0) {
    cert.divergent = true;
    cert.value = std::numeric_limits<double>::infinity();
    return cert;
  }

  const SGrid& g = p.grid;
  const double h = g.spacing();
  double acc = 0;
  for (int i = 1; i + 1 < g.n_points; ++i)
    acc += std::exp(-2.0 * lambda * p.values[size_t(i)]) * bg.g0_point[size_t(i)] * h;
  // Analytic tails from the boundary point densities.
  double fL = std::exp(-2.0 * lambda * p.values[0]) * bg.g0_point[0];
  double fR = std::exp(-2.0 * lambda * p.values.back()) * bg.g0_point.back();
  if (exL > band) acc += fL / exL;
  if (exR > band) acc += fR / exR;
  cert.value = acc;
  return cert;
}

IndexResult integrability_index(const RadialProfile& p, const BackgroundGeometry& bg,
                                double window_lo, double window_hi) {
  IndexResult r;
  r.lelong = lelong_number(p, window_lo, window_hi);
  const double nu = std::max(0.0, r.lelong.nu);
  if (nu < 1e-9) {
    r.c = std::numeric_limits<double>::infinity();
    return r;
  }
  r.c = 1.0 / nu;
  auto lo = skoda_check(p, 0.9 * r.c, bg);
  auto hi = skoda_check(p, 1.1 * r.c, bg);
  r.cross_checked = !lo.divergent && hi.divergent;
  return r;
}

EquisingularResult equisingular_approx(const RadialProfile& p, double eps,
                                       const BackgroundGeometry& bg) {
  if (!(eps > 0)) throw std::invalid_argument("equisingular_approx: eps must be > 0");
  const double a = p.slope_minus;
  if (a < 0) throw std::invalid_argument("equisingular_approx: pole coefficient < 0");
  EquisingularResult out;
  out.a_prime = std::max(a - eps / 4.0, 0.0);
  const double drop = a - out.a_prime;  // < eps/2 by construction
  out.psi = p;
  if (drop > 0) {
    for (int i = 0; i < p.size(); ++i)
      out.psi.values[size_t(i)] += drop * softplus(-p.grid.node(i));
    out.psi.slope_minus = out.a_prime;
  }
  // Certificate: e^{2(psi - p)/eps} dV must be integrable.
  RadialProfile ratio = RadialProfile::zero(p.grid);
  for (int i = 0; i < p.size(); ++i)
    ratio.values[size_t(i)] = -(out.psi.values[size_t(i)] - p.values[size_t(i)]) / eps;
  ratio.slope_minus = drop / eps;  // psi - p has slope -(a - a') at -inf
  out.certificate = skoda_check(ratio, 1.0, bg);
  if (out.certificate.divergent)
    throw std::logic_error("equisingular_approx: certificate divergent (construction bug)");
  return out;
}

RadialProfile supersolution(const RadialProfile& p, double gamma, double t,
                            const BackgroundGeometry& bg) {
  if (!(gamma > 0)) throw std::invalid_argument("supersolution: gamma must be > 0");
  if (!(t >= 0 && t <= 1.0 / gamma))
    throw std::invalid_argument("supersolution: t outside [0, 1/gamma]");
  auto pxx = d2(p);
  double C = 1.0;
  for (int i = 0; i < p.size(); ++i) {
    double c = pxx[size_t(i)] * std::exp(gamma * p.values[size_t(i)]) /
               bg.g0_density[size_t(i)];
    C = std::max(C, c);
  }
  RadialProfile out = (1.0 - gamma * t) * p + t * std::log(2.0 * C);
  return out;
}

RadialProfile solve_ma_radial(const std::vector<double>& f, const BackgroundGeometry& bg,
                              double compat_tol) {
  const SGrid& g = bg.grid();
  if (int(f.size()) != g.n_points)
    throw std::invalid_argument("solve_ma_radial: size mismatch");
  for (double v : f)
    if (!(v > 0)) throw std::invalid_argument("solve_ma_radial: density must be positive");
  const double V = bg.mass_omega();
  const double mass = bg.integrate(f);
  if (std::abs(mass - V) > compat_tol * V)
    throw std::invalid_argument("solve_ma_radial: mass compatibility violated (got " +
                                std::to_string(mass) + ", expected " + std::to_string(V) +
                                ")");
  const double h = g.spacing();
  // u'' = (f - 1) g0'' integrated on the staggered mesh; d2 of the result
  // reproduces the right-hand side exactly, including the boundary rows.
  std::vector<double> rhs(static_cast<size_t>(g.n_points));
  for (int i = 0; i < g.n_points; ++i)
    rhs[size_t(i)] = (f[size_t(i)] - 1.0) * bg.g0_density[size_t(i)];
  RadialProfile u = RadialProfile::zero(g);
  double du = 0.0;  // u' at the staggered node i+1/2, starting from slope 0
  for (int i = 0; i + 1 < g.n_points; ++i) {
    du += rhs[size_t(i)] * h;
    u.values[size_t(i) + 1] = u.values[size_t(i)] + du * h;
  }
  du += rhs[size_t(g.n_points) - 1] * h;
  u.slope_plus = du;  // equals (mass - V)/..., tiny under compatibility
  double m = *std::max_element(u.values.begin(), u.values.end());
  for (double& v : u.values) v -= m;
  return u;
}

}  // namespace krf
