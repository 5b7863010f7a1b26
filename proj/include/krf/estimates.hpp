#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "krf/capacity.hpp"
#include "krf/flow.hpp"
#include "krf/singular.hpp"

namespace krf {

enum class Verdict { Holds, Fails, Skipped };

/// Outcome of one estimate check: fitted constants, worst margin, witness.
struct EstimateReport {
  std::string id;
  Verdict verdict = Verdict::Holds;
  std::string skipped_reason;
  std::map<std::string, double> constants;
  double margin = 0.0;  // most negative slack seen (>= -tol when Holds)
  double witness_t = 0.0;
  double witness_s = 0.0;
  bool refinement_stable = true;
  std::vector<std::string> notes;

  bool passed() const { return verdict != Verdict::Fails; }
  void note(std::string s) { notes.push_back(std::move(s)); }
};

// Tolerances shared by the harness: exact structural orderings are checked at
// scheme level, quantitative fitted bounds at relative level after refinement.
struct Tolerances {
  double ordering = 1e-8;
  double upper_margin = 1e-6;
  double quantitative = 1e-4;
  double fit_slack = 2.0;  // fitted constants verified with this slack factor
};

/// One resolved experiment: background, class path, initial data, trajectory.
/// The estimate checks fit on a coarse run and verify on a refined one.
/// The background is held behind a stable pointer so copies stay wired.
struct LabRun {
  std::shared_ptr<BackgroundGeometry> bg;
  ClassPath path;
  RadialProfile phi0;  // initial data relative to omega (singular limit for
                       // maximal runs)
  FlowTrajectory traj;
  std::optional<MaximalFlowResult> maximal;

  static LabRun make(BackgroundGeometry b);
  const BackgroundGeometry& geom() const { return *bg; }
};

/// Parameters of the a-priori-estimate section: times, the less singular
/// weight psi and its certified integrals.
struct EstimateContext {
  double T = 0.0, S = 0.0;
  double eps0 = 0.0, eps = 0.0;
  double beta = 0.0, alpha = 0.0;
  RadialProfile psi_coarse, psi_fine;
  double E1 = 0.0, E2 = 0.0;
  double window_S = 0.0;  // available normalization window
  bool rescaled = false;  // true when T, S were shrunk into the window
};

/// Builds the context for a pole spec; throws std::invalid_argument when the
/// chain 1/(2c) < T < S < t_max cannot be met inside the normalization window.
EstimateContext make_estimate_context(const LabRun& coarse, const LabRun& fine,
                                      const SingularitySpec& spec, double T, double S,
                                      double eps0, double eps, double beta, double alpha);

// ---- ordering / structural checks ------------------------------------------

EstimateReport check_comparison(const FlowTrajectory& a, const FlowTrajectory& b,
                                const Tolerances& tol = {});

// ---- bounds from the a priori estimate section -------------------------------

EstimateReport check_upper_bound(const LabRun& run, const Tolerances& tol = {});
EstimateReport check_derivative_upper(const LabRun& run, const Tolerances& tol = {});
EstimateReport check_c0_lower(const LabRun& coarse, const LabRun& fine,
                              const EstimateContext& ctx, const Tolerances& tol = {});
EstimateReport check_dot_lower(const LabRun& coarse, const LabRun& fine,
                               const EstimateContext& ctx, const Tolerances& tol = {});
EstimateReport check_c2(const LabRun& coarse, const LabRun& fine,
                        const EstimateContext& ctx, const Tolerances& tol = {});

/// Velocity lower bound and trace bound under the analytic-singularity
/// hypotheses dot(phi0) >= C1 phi1, Delta phi0 <= e^{-C1 phi1}, phi0 >= delta phi2.
EstimateReport check_more_estimates(const LabRun& coarse, const LabRun& fine,
                                    const RadialProfile& phi1_c, const RadialProfile& phi2_c,
                                    const RadialProfile& phi1_f, const RadialProfile& phi2_f,
                                    double delta, double C1, const Tolerances& tol = {});

// ---- singular initial data ---------------------------------------------------

struct LelongDecayParams {
  std::vector<double> sample_times;  // inside the positivity window
  double bounded_time = 0.0;         // > nu0/2; boundedness is checked here
  double window_lo = -11.0, window_hi = -7.0;
  double envelope_slack = 0.02;
  double positivity_floor = 0.02;
  double supersolution_tol = 1e-4;
};

EstimateReport check_lelong_decay(const LabRun& coarse, const LabRun& fine,
                                  const SingularitySpec& spec,
                                  const LelongDecayParams& params,
                                  const Tolerances& tol = {});

EstimateReport check_lower_beta(const LabRun& run, double beta,
                                const std::vector<double>& sample_times,
                                const Tolerances& tol = {});

// ---- stability and convergence at zero ----------------------------------------

/// Perturbed trajectories against the limit trajectory at a fixed time.
EstimateReport check_stability(const std::vector<FlowTrajectory>& perturbed,
                               const FlowTrajectory& limit, double t_eval,
                               double final_tol, const Tolerances& tol = {});

struct ZeroConvergenceParams {
  double t0 = 0.4;
  int k_max = 6;
  double region_lo = -4.0, region_hi = 10.0;
  bool c2_branch = false;  // also check first/second derivatives
  double sup_tol = 1e-2;   // threshold at the last dyadic time
};

/// Dyadic monotonicity of u_t = phi_t + Ct - t log t + t log 4 on the region,
/// plus sup (and optionally derivative) convergence to phi0.
EstimateReport check_zero_convergence(const LabRun& coarse, const LabRun& fine,
                                      const RadialProfile& phi0_c,
                                      const RadialProfile& phi0_f,
                                      const ZeroConvergenceParams& params,
                                      const Tolerances& tol = {});

}  // namespace krf
