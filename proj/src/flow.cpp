#include "krf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <random>

namespace krf {

void FlowConfig::validate(double t_max) const {
  if (!(dt_init > 0)) throw std::invalid_argument("dt_init must be > 0");
  if (!(newton_tol > 0)) throw std::invalid_argument("newton_tol must be > 0");
  if (!(positivity_floor > 0)) throw std::invalid_argument("positivity_floor must be > 0");
  if (!(t_end < t_max)) throw std::invalid_argument("t_end must be < t_max");
}

const FlowState& FlowTrajectory::at_time(double t, double tol) const {
  for (const auto& st : states)
    if (std::abs(st.t - t) <= tol) return st;
  throw std::invalid_argument("trajectory does not contain the requested time");
}

bool FlowTrajectory::has_time(double t, double tol) const {
  for (const auto& st : states)
    if (std::abs(st.t - t) <= tol) return true;
  return false;
}

std::vector<double> ma_log_density(const FlowState& state, const BackgroundGeometry& bg,
                                   const ClassPath& path) {
  auto dens = path.theta_density(state.t);
  auto uxx = d2(state.u);
  for (size_t i = 0; i < dens.size(); ++i) {
    dens[i] += uxx[i];
    if (!(dens[i] > 0))
      throw DegenerateMetricError("ma_log_density: theta'' + u'' <= 0 at node " +
                                  std::to_string(i));
    dens[i] = std::log(dens[i] / bg.g0_density[i]);
  }
  return dens;
}

namespace {

std::string format_scientific(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Tridiagonal solve (Thomas).  Diagonals are overwritten.
void solve_tridiag(std::vector<double>& lo, std::vector<double>& di,
                   std::vector<double>& up, std::vector<double>& rhs) {
  const size_t n = di.size();
  for (size_t i = 1; i < n; ++i) {
    double w = lo[i] / di[i - 1];
    di[i] -= w * up[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= di[n - 1];
  for (size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - up[i] * rhs[i + 1]) / di[i];
}

// theta'' + D2 u for a zero-slope unknown u.  The stencil is accumulated in
// extended precision: its rounding, divided by h^2 and by near-degenerate
// densities, is what limits the Newton residual.
void density_of(const std::vector<double>& theta, const std::vector<double>& u,
                double h, std::vector<double>& out) {
  const size_t n = u.size();
  const long double ih2 = 1.0L / ((long double)h * (long double)h);
  out[0] = double(theta[0] + ((long double)u[1] - u[0]) * ih2);
  for (size_t i = 1; i + 1 < n; ++i)
    out[i] = double(theta[i] + ((long double)u[i - 1] - 2.0L * u[i] + u[i + 1]) * ih2);
  out[n - 1] = double(theta[n - 1] - ((long double)u[n - 1] - u[n - 2]) * ih2);
}

}  // namespace

FlowState step_implicit(const FlowState& state, double dt, const FlowConfig& cfg,
                        const BackgroundGeometry& bg, const ClassPath& path) {
  if (!(dt > 0)) throw std::invalid_argument("step_implicit: dt must be > 0");
  const size_t n = state.u.values.size();
  const double h = state.u.grid.spacing();
  const double ih2 = 1.0 / (h * h);
  const auto theta = path.theta_density(state.t + dt);
  const auto& prev = state.u.values;

  std::vector<double> u = prev, A(n), F(n), lo(n), di(n), up(n), rhs(n), trial(n),
      Atrial(n);

  // The log is continued linearly below the floor so intermediate Newton
  // iterates may pass through near-degenerate densities; the converged state
  // must satisfy the floor.
  const double floor = cfg.positivity_floor;
  auto barrier_log = [floor](double a) {
    return a >= floor ? std::log(a) : std::log(floor) + (a - floor) / floor;
  };
  auto residual = [&](const std::vector<double>& uu, std::vector<double>& AA,
                      std::vector<double>& FF) -> double {
    density_of(theta, uu, h, AA);
    double r = 0;
    for (size_t i = 0; i < n; ++i) {
      FF[i] = uu[i] - prev[i] - dt * (barrier_log(AA[i]) - std::log(bg.g0_density[i]));
      if (!std::isfinite(FF[i])) return std::numeric_limits<double>::infinity();
      r = std::max(r, std::abs(FF[i]));
    }
    return r;
  };

  double res = residual(u, A, F);
  if (!std::isfinite(res))
    throw DegenerateMetricError("step_implicit: non-finite residual at step start");

  // Newton descends until either the tolerance is met or double precision
  // stops further descent (rounding of the second differences over small
  // densities); the empirical stall is accepted below stall_tol.
  int stagnant = 0;
  for (int iter = 0; iter < cfg.newton_max_iter; ++iter) {
    if (res <= cfg.newton_tol) break;
    // Rows scaled by A_i/dt keep all tridiagonal entries at the 1/h^2 scale;
    // the raw Jacobian is badly conditioned where the density is small.
    for (size_t i = 0; i < n; ++i) {
      const bool left = i == 0, right = i + 1 == n;
      const double Aeff = std::max(A[i], floor);
      di[i] = Aeff / dt + ih2 * ((left || right) ? 1.0 : 2.0);
      lo[i] = left ? 0.0 : -ih2;
      up[i] = right ? 0.0 : -ih2;
      rhs[i] = -(Aeff / dt) * F[i];
    }
    solve_tridiag(lo, di, up, rhs);
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (size_t i = 0; i < n; ++i) trial[i] = u[i] + lambda * rhs[i];
      double rt = residual(trial, Atrial, F);
      if (std::isfinite(rt) && rt < res) {
        stagnant = rt > 0.99 * res ? stagnant + 1 : 0;
        u.swap(trial);
        A.swap(Atrial);
        res = rt;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted || stagnant >= 5) break;
  }
  // Rounding of the Newton direction perturbs the density by ~eps |u| / h^2,
  // which the log amplifies by 1/A at near-degenerate nodes: the residual
  // floors at dt times that ratio.  Such stalls are accepted, capped well
  // below the scale of a genuine failure (a log-jump of order one per step).
  {
    constexpr double kEps = 2.3e-16;
    double umax = 0, Amin = std::numeric_limits<double>::infinity();
    for (double v : u) umax = std::max(umax, std::abs(v));
    for (double a : A) Amin = std::min(Amin, a);
    const double noise_cap = dt * 16.0 * kEps * (1.0 + umax) * ih2 / std::max(Amin, 1e-300);
    const double accept = std::max({cfg.newton_tol, cfg.stall_tol,
                                    std::min(noise_cap, 0.02 * dt)});
    if (res <= accept) {
      if (!(Amin >= floor))
        throw DegenerateMetricError("step_implicit: converged state density " +
                                    format_scientific(Amin) + " below the floor");
      FlowState next{state.t + dt, state.u};
      next.u.values = u;
      return next;
    }
  }
  throw FlowError("step_implicit: Newton did not converge (residual " +
                  format_scientific(res) + ")");
}

FlowTrajectory run_flow(const RadialProfile& u0, const std::vector<double>& output_times,
                        const FlowConfig& cfg, const BackgroundGeometry& bg,
                        const ClassPath& path) {
  cfg.validate(path.t_max);
  if (std::abs(u0.slope_minus) > 1e-9 || std::abs(u0.slope_plus) > 1e-9)
    throw std::invalid_argument("run_flow: initial profile must have zero slopes");
  u0.check_finite("initial profile");
  for (size_t k = 0; k < output_times.size(); ++k) {
    if (!(output_times[k] > 0 && output_times[k] <= cfg.t_end + 1e-12))
      throw std::invalid_argument("run_flow: output times must lie in (0, t_end]");
    if (k > 0 && !(output_times[k] > output_times[k - 1]))
      throw std::invalid_argument("run_flow: output times must increase");
  }

  FlowTrajectory traj;
  FlowState cur{0.0, u0};
  traj.states.push_back(cur);  // initial state rides along at t = 0
  const double dt_min = cfg.dt_init * std::pow(2.0, -20);
  double dt_cur = cfg.dt_init;

  for (double target : output_times) {
    while (cur.t < target - 1e-13) {
      double dt = std::min(dt_cur, target - cur.t);
      for (;;) {
        try {
          FlowState next = step_implicit(cur, dt, cfg, bg, path);
          traj.step_log.push_back({next.t, dt, 0, 0});
          ++traj.total_steps;
          cur = std::move(next);
          break;
        } catch (const FlowError&) {
          if (cfg.dt_policy == DtPolicy::Fixed) throw;
          dt *= 0.5;
          dt_cur = dt;
          if (dt < dt_min) throw FlowError("run_flow: dt underflow after rejections");
        }
      }
      if (cfg.dt_policy == DtPolicy::Adaptive && dt_cur < cfg.dt_init)
        dt_cur = std::min(cfg.dt_init, dt_cur * 1.3);
    }
    FlowState out = cur;
    out.t = target;  // within 1e-13 of the marched time
    traj.states.push_back(std::move(out));
  }
  return traj;
}

double SingularitySpec::index() const {
  if (a <= 0) return std::numeric_limits<double>::infinity();
  return 1.0 / (2.0 * a);
}

RadialProfile SingularitySpec::approximant(const SGrid& g, double depth) const {
  RadialProfile p = RadialProfile::from_function(
      g,
      [this, depth](double s) {
        return a * (log_add_exp(s, -depth) - softplus(s));
      },
      0.0, 0.0);
  if (bounded_tail) p = p + *bounded_tail;
  return p;
}

RadialProfile SingularitySpec::limit_profile(const SGrid& g) const {
  RadialProfile p = RadialProfile::from_function(
      g, [this](double s) { return -a * softplus(-s); }, a, 0.0);
  if (bounded_tail) p = p + *bounded_tail;
  return p;
}

ApproximantFamily default_family(const SingularitySpec& spec, std::vector<double> depths) {
  ApproximantFamily fam;
  fam.name = "glue";
  fam.depths = std::move(depths);
  fam.make = [spec](const SGrid& g, double d) { return spec.approximant(g, d); };
  return fam;
}

namespace {

// Nodewise Aitken extrapolation of a monotone sequence; falls back to the
// last iterate unless the increments decay geometrically (near-equal
// increments would divide by noise and overshoot wildly).
double aitken(double x0, double x1, double x2) {
  const double d1 = x1 - x0, d2 = x2 - x1;
  const double den = d2 - d1;
  if (std::abs(den) < 1e-14 || !(d1 * d2 > 0) || std::abs(d2) >= 0.6 * std::abs(d1))
    return x2;
  return x2 - d2 * d2 / den;
}

}  // namespace

MaximalFlowResult maximal_flow(const SingularitySpec& spec, const ApproximantFamily& family,
                               const std::vector<double>& output_times, const FlowConfig& cfg,
                               const BackgroundGeometry& bg, const ClassPath& path,
                               const MaximalFlowOptions& opts) {
  if (family.depths.empty()) throw std::invalid_argument("maximal_flow: empty family");
  for (size_t k = 1; k < family.depths.size(); ++k)
    if (!(family.depths[k] > family.depths[k - 1]))
      throw std::invalid_argument("maximal_flow: depths must increase");
  const SGrid& g = bg.grid();
  for (double d : family.depths)
    if (-d < g.s_min + opts.guard_margin)
      throw std::invalid_argument(
          "maximal_flow: approximant transition scale leaves the grid window");

  MaximalFlowResult res;
  const bool expect_divergence = spec.index() < std::numeric_limits<double>::infinity()
                                     ? (1.0 / (2.0 * spec.index()) >= path.t_max)
                                     : false;

  if (spec.a <= 0) {
    RadialProfile u0 = spec.bounded_tail ? *spec.bounded_tail : RadialProfile::zero(g);
    res.limit = run_flow(u0, output_times, cfg, bg, path);
    res.per_depth.push_back(res.limit);
    res.depths_used.push_back(0.0);
    return res;
  }

  const int probe = g.nearest(opts.probe_s);
  const size_t n_states = output_times.size() + 1;  // t = 0 rides along
  res.probe_values.assign(n_states, {});

  for (double d : family.depths) {
    RadialProfile u0 = family.make(g, d);
    FlowTrajectory traj = run_flow(u0, output_times, cfg, bg, path);
    if (!res.per_depth.empty()) {
      const auto& prev = res.per_depth.back();
      for (size_t k = 0; k < n_states; ++k) {
        const auto& a = traj.states[k].u.values;
        const auto& b = prev.states[k].u.values;
        for (size_t i = 0; i < a.size(); ++i)
          if (a[i] > b[i] + opts.monotone_tol) res.monotone_in_depth = false;
      }
    }
    for (size_t k = 0; k < n_states; ++k)
      res.probe_values[k].push_back(traj.states[k].u.values[size_t(probe)]);
    res.per_depth.push_back(std::move(traj));
    res.depths_used.push_back(d);

    if (res.per_depth.size() >= 2 && !expect_divergence) {
      const auto& a = res.per_depth[res.per_depth.size() - 2];
      const auto& b = res.per_depth.back();
      double gap = 0;
      for (size_t k = 0; k < n_states; ++k)
        gap = std::max(gap, window_diff(b.states[k].u, a.states[k].u, opts.window_lo,
                                        opts.window_hi));
      if (gap < opts.stop_tol / 4.0 && res.per_depth.size() >= 3) break;
    }
  }

  // Divergence: persistent per-member drops at the probe node.
  if (res.per_depth.size() >= 3) {
    const auto& pv = res.probe_values[n_states - 1];
    double d1 = pv[pv.size() - 2] - pv[pv.size() - 3];
    double d2v = pv[pv.size() - 1] - pv[pv.size() - 2];
    if (d2v < -opts.divergence_drop && std::abs(d2v) > 0.9 * std::abs(d1))
      res.diverged = true;
  }
  if (expect_divergence) res.diverged = res.diverged || res.per_depth.size() >= 2;

  // Extrapolated limit (meaningful only when not diverged).
  res.limit = res.per_depth.back();
  const size_t m = res.per_depth.size();
  if (!res.diverged && m >= 3) {
    for (size_t k = 0; k < n_states; ++k) {
      auto& lim = res.limit.states[k].u;
      const auto& x0 = res.per_depth[m - 3].states[k].u.values;
      const auto& x1 = res.per_depth[m - 2].states[k].u.values;
      const auto& x2 = res.per_depth[m - 1].states[k].u.values;
      for (size_t i = 0; i < lim.values.size(); ++i)
        lim.values[i] = aitken(x0[i], x1[i], x2[i]);
      res.extrapolation_residual =
          std::max(res.extrapolation_residual,
                   window_diff(lim, res.per_depth[m - 1].states[k].u, opts.window_lo,
                               opts.window_hi));
    }
  }
  return res;
}

RescaledTrajectory time_rescale(const FlowTrajectory& traj, const BackgroundGeometry& bg,
                                const ClassPath& path) {
  if (traj.states.empty()) throw std::invalid_argument("time_rescale: empty trajectory");
  RescaledTrajectory out;
  const auto& g0d = bg.g0_density;
  const double h = bg.grid().spacing();
  for (const auto& st : traj.states) {
    if (!(st.t < 1.0))
      throw std::invalid_argument("time_rescale: requires trajectory times < 1");
    const double tp = -std::log1p(-st.t);  // t' with 1 - e^{-t'} = t
    const double et = std::exp(tp);
    RadialProfile u = et * st.u;
    // Residual of u' = u - t' + log[(omega + (e^{t'}-1)(omega+chi) + dd^c u)/omega],
    // with u' evaluated through the original PDE right-hand side.
    auto phidot = ma_log_density(st, bg, path);
    auto uxx = d2(u);
    double resid = 0;
    for (size_t i = 0; i < g0d.size(); ++i) {
      double dens = g0d[i] + (et - 1.0) * (g0d[i] + path.chi_density[i]) + uxx[i];
      if (!(dens > 0)) throw DegenerateMetricError("time_rescale: degenerate density");
      double lhs = u.values[i] + phidot[i];  // d/dt' of e^{t'} phi_{1-e^{-t'}}
      double rhs = u.values[i] - tp + std::log(dens / g0d[i]);
      resid = std::max(resid, std::abs(lhs - rhs));
    }
    (void)h;
    out.times.push_back(tp);
    out.potentials.push_back(std::move(u));
    out.max_residual = std::max(out.max_residual, resid);
  }
  return out;
}

RadialProfile exact_example_solution(double j, double t, const SGrid& grid) {
  if (!(t >= 0 && t < 1))
    throw std::invalid_argument("exact_example_solution: t must lie in [0, 1)");
  if (!(j >= 1)) throw std::invalid_argument("exact_example_solution: j must be >= 1");
  const double logj = std::log(j);
  const double shift = -t * logj - t + (t - 1.0) * std::log1p(-t);
  return RadialProfile::from_function(
      grid,
      [&](double s) {
        double phi0j = 2.0 * (log_add_exp(s, -logj) - softplus(s));
        return (1.0 - t) * phi0j + shift;
      },
      0.0, 0.0);
}

namespace {

// Bounded glue of a slope change at c over unit scale: increases from 0 to
// (c2 - c1); curvature decays like e^{-|s|} matching the background density.
double ramp(double s, double c1, double c2) { return softplus(s - c1) - softplus(s - c2); }

}  // namespace

RadialProfile random_smooth_profile(const BackgroundGeometry& bg, unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> center(-3.0, 3.0), width(0.8, 2.5),
      amp(-1.0, 1.0), off(-0.5, 0.5);
  const double V = bg.mass_omega();
  // Curvature of each ramp stays below (|mu| e^{|c|}/V) g0''; keep the total
  // well inside the psh cone.
  const double budget = 0.35 * V / std::exp(3.0);
  RadialProfile p = RadialProfile::constant(bg.grid(), off(rng));
  for (int k = 0; k < 4; ++k) {
    double c = center(rng), w = width(rng), mu = amp(rng) * budget / 4.0;
    for (int i = 0; i < p.size(); ++i) {
      double s = p.grid.node(i);
      p.values[size_t(i)] += mu * ramp(s, c - w, c + w);
    }
  }
  return p;
}

RadialProfile random_nonneg_increment(const BackgroundGeometry& bg, unsigned long seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> center(-2.5, 2.5), width(0.8, 2.0),
      amp(0.0, 1.0), off(0.0, 0.8);
  const double V = bg.mass_omega();
  const double budget = 0.2 * V / std::exp(3.0);
  RadialProfile p = RadialProfile::constant(bg.grid(), off(rng));
  double c = center(rng), w = width(rng), mu = amp(rng) * budget;
  for (int i = 0; i < p.size(); ++i)
    p.values[size_t(i)] += mu * ramp(p.grid.node(i), c - w, c + w);
  return p;
}

}  // namespace krf
