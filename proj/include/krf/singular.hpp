#pragma once

#include "krf/flow.hpp"
#include "krf/geometry.hpp"

namespace krf {

/// Verdict of a weighted-volume quadrature with analytic tail extrapolation.
struct IntegrabilityCertificate {
  double lambda = 0.0;
  double value = 0.0;            // quadrature + tails; meaningless when divergent
  double tail_slope = 0.0;       // fitted slope of the profile near s_min
  double tail_exponent = 0.0;    // exponent of the left tail integrand
  bool divergent = false;
  bool boundary_case = false;    // |tail exponent| below the resolution band
};

struct LelongMeasurement {
  double nu = 0.0;
  double sensitivity = 0.0;  // change under a quarter-window shift
  bool confident = true;
};

/// Lelong number at the z = 0 pole: twice the least-squares slope of p over
/// a window [s_lo, s_hi] strictly inside the left half of the grid.
LelongMeasurement lelong_number(const RadialProfile& p, double s_lo, double s_hi,
                                double sensitivity_threshold = 0.05);

/// Quadrature of e^{-2 lambda p} dV with tail extrapolation.
IntegrabilityCertificate skoda_check(const RadialProfile& p, double lambda,
                                     const BackgroundGeometry& bg);

struct IndexResult {
  double c = 0.0;  // +inf for zero Lelong number
  bool cross_checked = true;
  LelongMeasurement lelong;
};

/// Integrability index c = 1/nu, cross-checked by skoda_check at c(1 +- 0.1).
IndexResult integrability_index(const RadialProfile& p, const BackgroundGeometry& bg,
                                double window_lo, double window_hi);

struct EquisingularResult {
  RadialProfile psi;
  double a_prime = 0.0;
  IntegrabilityCertificate certificate;  // for e^{2(psi - p)/eps} dV
};

/// Less singular approximant psi >= p with pole coefficient
/// a' = max(a - eps/4, 0), built by a log-sum-exp glue; hard error if the
/// certificate quadrature were divergent.
EquisingularResult equisingular_approx(const RadialProfile& p, double eps,
                                       const BackgroundGeometry& bg);

/// Supersolution barrier (1 - gamma t) p + t log(2C) with C taken from the
/// grid maximum of dd^c p against e^{-gamma p} omega.  Requires t <= 1/gamma.
RadialProfile supersolution(const RadialProfile& p, double gamma, double t,
                            const BackgroundGeometry& bg);

/// Solve (omega + dd^c u) = f omega with slope_minus(u) = 0 and max u = 0 by
/// double integration.  Rejects densities violating the mass compatibility
/// |integral of f dV - mass_omega| > tol * mass_omega.
RadialProfile solve_ma_radial(const std::vector<double>& f, const BackgroundGeometry& bg,
                              double compat_tol = 5e-3);

}  // namespace krf
