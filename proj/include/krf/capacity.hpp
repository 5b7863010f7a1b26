#pragma once

#include "krf/geometry.hpp"

namespace krf {

/// Instance of the generalized capacity LP: maximize the Monge-Ampere mass of
/// u on the index set E over candidates pinched between psi - 1 and psi, with
/// the class constraints on the asymptotic slopes.
struct CapProblem {
  const BackgroundGeometry* bg = nullptr;
  RadialProfile psi;
  std::vector<int> E;
};

struct CapResult {
  double value = 0.0;
  double cs_residual = 0.0;  // complementary-slackness certificate
  int iterations = 0;
  std::vector<double> u_opt;
};

CapResult cap_psi(const CapProblem& problem);

/// Sampled non-increasing decay function with its constant C.
struct DecayFunction {
  std::vector<double> t;
  std::vector<double> g;
  double C = 1.0;
};

struct KolodziejResult {
  bool hypothesis_ok = true;
  double t_star = 0.0;       // t0 + 2
  bool extinct = false;      // g <= floor on all samples past t_star
  double witness_t = 0.0;    // hypothesis counterexample pair (t, s)
  double witness_s = 0.0;
};

/// Checks s g(t+s) <= C g(t)^2 on all sampled pairs with s in (0, 1], then
/// verifies extinction at t0 + 2.  Requires g(t0) <= 1/(2C).
KolodziejResult kolodziej_extinction(const DecayFunction& d, double t0,
                                     double floor = 1e-12);

}  // namespace krf
