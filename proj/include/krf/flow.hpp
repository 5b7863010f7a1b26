#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "krf/geometry.hpp"

namespace krf {

struct FlowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateMetricError : FlowError {
  using FlowError::FlowError;
};

enum class DtPolicy { Fixed, Adaptive };

struct FlowConfig {
  double dt_init = 1e-3;
  DtPolicy dt_policy = DtPolicy::Fixed;
  int target_newton_iters = 6;  // adaptive policy grows dt below this count
  double newton_tol = 1e-11;    // sup-norm residual of the implicit step
  double stall_tol = 0.0;       // manual override for the stall acceptance
  int newton_max_iter = 80;
  double positivity_floor = 1e-12;  // lower bound kept on theta'' + u''
  double t_end = 0.0;               // must stay below t_max

  void validate(double t_max) const;
};

/// Potential at one time, relative to theta_t.
struct FlowState {
  double t = 0.0;
  RadialProfile u;
};

struct StepStats {
  double t_after = 0.0;
  double dt = 0.0;
  int newton_iters = 0;
  int rejects = 0;
};

struct FlowTrajectory {
  std::vector<FlowState> states;  // at the requested output times, increasing
  std::vector<StepStats> step_log;
  long total_steps = 0;

  const FlowState& at_time(double t, double tol = 1e-9) const;
  bool has_time(double t, double tol = 1e-9) const;
};

/// log[(theta_t'' + u'') / g0''] nodewise; this is the flow velocity.
std::vector<double> ma_log_density(const FlowState& state,
                                   const BackgroundGeometry& bg,
                                   const ClassPath& path);

/// One backward-Euler step solved by damped Newton on the tridiagonal
/// linearization.  Throws FlowError when Newton fails (fixed policy);
/// run_flow handles retries for the adaptive policy.
FlowState step_implicit(const FlowState& state, double dt, const FlowConfig& cfg,
                        const BackgroundGeometry& bg, const ClassPath& path);

/// March from u0 (bounded, zero asymptotic slopes) and sample the requested
/// output times exactly.
FlowTrajectory run_flow(const RadialProfile& u0, const std::vector<double>& output_times,
                        const FlowConfig& cfg, const BackgroundGeometry& bg,
                        const ClassPath& path);

/// Log-pole data at z = 0: coefficient a (slope in s at -inf), Lelong number
/// nu = 2a and integrability index c = 1/(2a).
struct SingularitySpec {
  double a = 0.0;
  std::optional<RadialProfile> bounded_tail;  // regular part, zero slopes

  double lelong() const { return 2.0 * a; }
  double index() const;  // +inf when a == 0
  /// Smooth approximant at the given glue depth d (transition near s = -d),
  /// decreasing in d to the singular profile.
  RadialProfile approximant(const SGrid& g, double depth) const;
  /// The singular limit profile (slope a at -inf) on the grid.
  RadialProfile limit_profile(const SGrid& g) const;
};

/// A decreasing family of smooth approximants indexed by glue depth.
struct ApproximantFamily {
  std::string name;
  std::vector<double> depths;  // strictly increasing
  std::function<RadialProfile(const SGrid&, double)> make;
};

ApproximantFamily default_family(const SingularitySpec& spec,
                                 std::vector<double> depths);

struct MaximalFlowOptions {
  double window_lo = -6.0;  // measurement window for the limit in depth
  double window_hi = 6.0;
  double stop_tol = 1e-6;        // stop when successive iterates differ < tol/4
  double monotone_tol = 1e-8;    // allowed violation of decrease in depth
  double guard_margin = 1.5;     // transition scale must stay this far inside
  double divergence_drop = 1e-2; // per-step drop at probe node declaring divergence
  double probe_s = 0.0;
};

struct MaximalFlowResult {
  FlowTrajectory limit;                    // extrapolated in depth
  std::vector<FlowTrajectory> per_depth;   // one per family member used
  std::vector<double> depths_used;
  bool diverged = false;
  double extrapolation_residual = 0.0;     // on the measurement window
  bool monotone_in_depth = true;
  /// Per output time: value of the iterates at the probe node.
  std::vector<std::vector<double>> probe_values;
};

/// Monotone approximation of the flow from singular data.  When
/// 1/(2c) >= t_max the family diverges and the result reports the divergence
/// instead of a limit (limit states hold the last iterate).
MaximalFlowResult maximal_flow(const SingularitySpec& spec,
                               const ApproximantFamily& family,
                               const std::vector<double>& output_times,
                               const FlowConfig& cfg, const BackgroundGeometry& bg,
                               const ClassPath& path,
                               const MaximalFlowOptions& opts = {});

/// Change of variables u_t = e^t phi_{1 - e^{-t}}; the residual of the
/// transformed equation is evaluated nodewise from the PDE right-hand side.
struct RescaledTrajectory {
  std::vector<double> times;  // rescaled times t' = -log(1 - t)
  std::vector<RadialProfile> potentials;
  double max_residual = 0.0;
};

RescaledTrajectory time_rescale(const FlowTrajectory& traj,
                                const BackgroundGeometry& bg, const ClassPath& path);

/// Closed-form flow for the mass-2 Fubini-Study background with eta = 0:
/// phi_{t,j} = (1-t) phi_{0,j} - t log j - t + (t-1) log(1-t), where
/// phi_{0,j}(s) = 2 log(e^s + 1/j) - 2 log(e^s + 1).  Defined for 0 <= t < 1.
RadialProfile exact_example_solution(double j, double t, const SGrid& grid);

/// Smooth bounded test data: sums of glued slope-changes with zero slopes,
/// kept strictly psh for the given background.  Used by the seeded sweeps.
RadialProfile random_smooth_profile(const BackgroundGeometry& bg, unsigned long seed);
/// Nonnegative bounded increment, psh-compatible, for ordered pairs.
RadialProfile random_nonneg_increment(const BackgroundGeometry& bg, unsigned long seed);

}  // namespace krf
