#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace krf {

/// Uniform grid in the log coordinate s = log|z|^2.
struct SGrid {
  double s_min = 0.0;
  double s_max = 0.0;
  int n_points = 0;

  static SGrid uniform(double s_min, double s_max, int n_points);

  double spacing() const { return (s_max - s_min) / double(n_points - 1); }
  double node(int i) const { return s_min + spacing() * double(i); }
  bool same_as(const SGrid& o, double tol = 1e-12) const;
  /// Same interval, (n-1)*factor + 1 nodes.
  SGrid refined(int factor) const;
  /// Index of the node closest to s.
  int nearest(double s) const;
};

/// Potential as a function of s, with declared asymptotic slopes at both ends.
/// Slopes define ghost values for one-sided second differences.
struct RadialProfile {
  SGrid grid;
  std::vector<double> values;
  double slope_minus = 0.0;  // derivative as s -> -inf
  double slope_plus = 0.0;   // derivative as s -> +inf

  static RadialProfile zero(const SGrid& g);
  static RadialProfile constant(const SGrid& g, double c);
  static RadialProfile from_function(const SGrid& g,
                                     const std::function<double(double)>& f,
                                     double slope_minus, double slope_plus);

  int size() const { return int(values.size()); }
  double slope_difference() const { return slope_plus - slope_minus; }
  void check_finite(const std::string& what) const;
};

// Pointwise arithmetic. Grids must match.
RadialProfile operator+(const RadialProfile& a, const RadialProfile& b);
RadialProfile operator-(const RadialProfile& a, const RadialProfile& b);
RadialProfile operator*(double c, const RadialProfile& p);
RadialProfile operator+(const RadialProfile& p, double c);

/// Centered second differences; boundary rows use ghost values extrapolated
/// with the declared slopes.  Summing the result times the spacing gives
/// exactly slope_plus - slope_minus.
std::vector<double> d2(const RadialProfile& p);

/// Least-squares slope of p over the node window [s_lo, s_hi].
double fit_slope(const RadialProfile& p, double s_lo, double s_hi);

double sup_norm(const std::vector<double>& v);
double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b);
double max_abs_diff(const RadialProfile& a, const RadialProfile& b);
/// max |a-b| restricted to nodes with s in [s_lo, s_hi].
double window_diff(const RadialProfile& a, const RadialProfile& b, double s_lo,
                   double s_hi);
double window_max(const SGrid& g, const std::vector<double>& v, double s_lo,
                  double s_hi);

// Numerically stable primitives used to build glued potentials.
double softplus(double s);                 // log(1 + e^s)
double log_add_exp(double a, double b);    // log(e^a + e^b)

}  // namespace krf
