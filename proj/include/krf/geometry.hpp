#pragma once

#include <optional>

#include "krf/grid.hpp"

namespace krf {

/// Background Kahler data in the radial reduction: potentials of omega, eta
/// and Ric(omega), plus the associated discrete measures.
///
/// Two discrete densities are kept for omega:
///  - g0_density: d2(g0), mass-exact (sums to mass_omega times 1/spacing),
///    with tail mass lumped into the boundary nodes.  Used by the flow.
///  - g0_point:   pointwise values of g0'' with log-linear extrapolation at
///    the two boundary nodes.  Used by quadratures with analytic tails.
struct BackgroundGeometry {
  RadialProfile g0;
  RadialProfile eta_hat;
  RadialProfile ricci_hat;
  std::vector<double> g0_density;
  std::vector<double> g0_point;
  std::vector<double> ricci_density;
  std::vector<double> eta_density;

  double mass_omega() const { return g0.slope_difference(); }
  double mass_c1() const { return ricci_hat.slope_difference(); }
  double mass_eta() const { return eta_hat.slope_difference(); }
  const SGrid& grid() const { return g0.grid; }

  /// Quadrature against dV = g0'' ds using the mass-exact weights.
  double integrate(const std::vector<double>& f) const;
};

/// Ricci potential r with dd^c r representing Ric(omega): r = s - log g''(s),
/// interior stencil with log-linear extrapolation at the boundary nodes.
/// Rejects g with non-positive discrete curvature.
RadialProfile ricci_potential(const RadialProfile& g);

/// Ricci measure of g, discretized with the same mass convention as d2:
/// curvature ratio extrapolated flat onto the lumped boundary cells.
std::vector<double> ricci_density_of(const RadialProfile& g,
                                     const std::vector<double>& g_density);

/// Fubini-Study type background of total mass V: g0(s) = V log(1 + e^s),
/// eta = 0, Ricci potential computed from the grid.
BackgroundGeometry make_fubini_study(double V, const SGrid& grid);

/// Eta choices used by the experiment configs.
enum class EtaKind { Zero, ProportionalRicci, ProportionalOmega };
void set_eta(BackgroundGeometry& bg, EtaKind kind, double factor);

/// The evolving class theta_t = omega + t (eta - Ric(omega)).
struct ClassPath {
  const BackgroundGeometry* bg = nullptr;
  RadialProfile chi;                  // eta_hat - ricci_hat
  std::vector<double> chi_density;    // eta_density - ricci_density
  double t_max = 0.0;

  RadialProfile theta_potential(double t) const;
  std::vector<double> theta_density(double t) const;
};

ClassPath make_class_path(const BackgroundGeometry& bg);

/// Nef threshold: sup{ t >= 0 : mass_omega + t (mass_eta - mass_c1) > 0 },
/// +infinity when the coefficient of t is >= 0.
double compute_tmax(const BackgroundGeometry& bg);

/// Largest S such that (2/3) omega <= theta_t <= 2 omega nodewise on [0, S].
double normalization_window(const BackgroundGeometry& bg, const ClassPath& path);

}  // namespace krf
