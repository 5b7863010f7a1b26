#include "krf/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace krf {

LabRun LabRun::make(BackgroundGeometry b) {
  LabRun r;
  r.bg = std::make_shared<BackgroundGeometry>(std::move(b));
  r.path = make_class_path(*r.bg);
  return r;
}

namespace {

struct ArgMin {
  double value = std::numeric_limits<double>::infinity();
  double t = 0.0, s = 0.0;
  void feed(double v, double at_t, double at_s) {
    if (v < value) {
      value = v;
      t = at_t;
      s = at_s;
    }
  }
};

std::vector<const FlowState*> states_in(const FlowTrajectory& traj, double lo, double hi) {
  std::vector<const FlowState*> out;
  for (const auto& st : traj.states)
    if (st.t > lo + 1e-12 && st.t <= hi + 1e-9) out.push_back(&st);
  return out;
}

void finish(EstimateReport& r, const ArgMin& am, double tol) {
  r.margin = am.value;
  r.witness_t = am.t;
  r.witness_s = am.s;
  if (am.value < -tol) r.verdict = Verdict::Fails;
}

}  // namespace

EstimateContext make_estimate_context(const LabRun& coarse, const LabRun& fine,
                                      const SingularitySpec& spec, double T, double S,
                                      double eps0, double eps, double beta, double alpha) {
  EstimateContext ctx;
  ctx.eps0 = eps0;
  ctx.eps = eps;
  ctx.beta = beta;
  ctx.alpha = alpha;
  const double t_max = coarse.path.t_max;
  const double half_c = spec.a > 0 ? 1.0 / (2.0 * spec.index()) : 0.0;

  ctx.window_S = normalization_window(coarse.geom(), coarse.path);
  double S_eff = std::min(S, 0.98 * ctx.window_S);
  double T_eff = std::min(T, 0.8 * S_eff);
  ctx.rescaled = S_eff < S - 1e-12 || T_eff < T - 1e-12;
  if (!(half_c < T_eff && T_eff < S_eff && S_eff < t_max))
    throw std::invalid_argument(
        "estimate context infeasible: requires 1/(2c) < T < S < t_max inside the "
        "normalization window (1/(2c) = " + std::to_string(half_c) +
        ", t_max = " + std::to_string(t_max) + ", window = " + std::to_string(ctx.window_S) + ")");
  ctx.T = T_eff;
  ctx.S = S_eff;
  if (!(eps0 > 0 && eps > eps0 && eps < T_eff))
    throw std::invalid_argument("estimate context requires 0 < eps0 < eps < T");
  if (!(half_c < 1.0 / (2.0 * beta) && 2.0 * beta - alpha > 0 &&
        1.0 / (2.0 * beta) < 1.0 / (2.0 * beta - alpha) &&
        1.0 / (2.0 * beta - alpha) < t_max))
    throw std::invalid_argument("estimate context requires 1/(2c) < 1/(2b) < 1/(2b-a) < t_max");

  auto build_psi = [&](const LabRun& run) {
    RadialProfile p = spec.limit_profile(run.geom().grid());
    auto eq = equisingular_approx(p, eps0, run.geom());
    double mx = *std::max_element(eq.psi.values.begin(), eq.psi.values.end());
    if (mx > 0) eq.psi = eq.psi + (-mx);  // the weight is normalized <= 0
    return eq;
  };
  auto eqc = build_psi(coarse);
  ctx.psi_coarse = eqc.psi;
  ctx.psi_fine = build_psi(fine).psi;
  ctx.E1 = eqc.certificate.value;
  auto e2 = skoda_check(ctx.psi_coarse, 1.0 / (2.0 * ctx.T), coarse.geom());
  if (e2.divergent)
    throw std::invalid_argument("estimate context: E2 quadrature divergent");
  ctx.E2 = e2.value;
  return ctx;
}

EstimateReport check_comparison(const FlowTrajectory& a, const FlowTrajectory& b,
                                const Tolerances& tol) {
  EstimateReport r;
  r.id = "comparison";
  if (a.states.size() != b.states.size())
    throw std::invalid_argument("check_comparison: trajectories sample different times");
  const auto& g = a.states[0].u.grid;
  if (!g.same_as(b.states[0].u.grid))
    throw std::invalid_argument("check_comparison: mismatched grids");
  double bound = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < a.states[0].u.values.size(); ++i)
    bound = std::max(bound, a.states[0].u.values[i] - b.states[0].u.values[i]);
  r.constants["sup_initial_gap"] = bound;
  ArgMin am;
  for (size_t k = 1; k < a.states.size(); ++k) {
    if (std::abs(a.states[k].t - b.states[k].t) > 1e-9)
      throw std::invalid_argument("check_comparison: trajectories sample different times");
    for (size_t i = 0; i < a.states[k].u.values.size(); ++i) {
      double gap = a.states[k].u.values[i] - b.states[k].u.values[i];
      am.feed(bound - gap, a.states[k].t, g.node(int(i)));
    }
  }
  finish(r, am, tol.ordering);
  return r;
}

EstimateReport check_upper_bound(const LabRun& run, const Tolerances& tol) {
  EstimateReport r;
  r.id = "upper-bound";
  const auto& traj = run.traj;
  const double t_last = traj.states.back().t;
  // Applicability window: theta_t <= 2 omega on [0, t_last].
  double S_upper = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < run.geom().g0_density.size(); ++i)
    if (run.path.chi_density[i] > 0)
      S_upper = std::min(S_upper, run.geom().g0_density[i] / run.path.chi_density[i]);
  if (t_last > S_upper) {
    r.verdict = Verdict::Skipped;
    r.skipped_reason = "normalization window unattainable: theta_t <= 2 omega fails before t_end";
    return r;
  }
  r.constants["window_S_upper"] = S_upper;
  const auto& u0 = traj.states[0].u;
  double sup0 = *std::max_element(u0.values.begin(), u0.values.end());
  ArgMin am;
  for (size_t k = 1; k < traj.states.size(); ++k) {
    const auto& st = traj.states[k];
    for (size_t i = 0; i < st.u.values.size(); ++i)
      am.feed(sup0 + st.t * std::log(2.0) - st.u.values[i], st.t, u0.grid.node(int(i)));
  }
  finish(r, am, tol.upper_margin);
  return r;
}

EstimateReport check_derivative_upper(const LabRun& run, const Tolerances& tol) {
  EstimateReport r;
  r.id = "derivative-upper";
  const auto& traj = run.traj;
  const auto& u0 = traj.states[0].u;
  ArgMin am;
  for (size_t k = 1; k < traj.states.size(); ++k) {
    const auto& st = traj.states[k];
    auto dot = ma_log_density(st, run.geom(), run.path);
    for (size_t i = 0; i < dot.size(); ++i) {
      double rhs = (st.u.values[i] - u0.values[i]) / st.t + 1.0;
      am.feed(rhs - dot[i], st.t, u0.grid.node(int(i)));
    }
  }
  finish(r, am, tol.upper_margin);
  return r;
}

namespace {

// Largest value of expr over states with t in (lo, hi]; expr(state, node).
template <class F>
double fit_max(const LabRun& run, double lo, double hi, F&& expr) {
  double m = -std::numeric_limits<double>::infinity();
  for (const FlowState* st : states_in(run.traj, lo, hi))
    for (size_t i = 0; i < st->u.values.size(); ++i)
      m = std::max(m, expr(*st, i));
  return m;
}

}  // namespace

EstimateReport check_c0_lower(const LabRun& coarse, const LabRun& fine,
                              const EstimateContext& ctx, const Tolerances& tol) {
  EstimateReport r;
  r.id = "c0-lower";
  if (ctx.rescaled) r.note("T,S shrunk into the normalization window");
  auto bound = [&](const RadialProfile& psi, const FlowState& st, size_t i) {
    return (1.0 - st.t / (2.0 * ctx.T)) * psi.values[i];
  };
  double C_c = fit_max(coarse, ctx.eps, ctx.T, [&](const FlowState& st, size_t i) {
    return bound(ctx.psi_coarse, st, i) - st.u.values[i];
  });
  double C_f = fit_max(fine, ctx.eps, ctx.T, [&](const FlowState& st, size_t i) {
    return bound(ctx.psi_fine, st, i) - st.u.values[i];
  });
  r.constants["C"] = C_c;
  r.constants["C_refined"] = C_f;
  r.constants["E1"] = ctx.E1;
  r.constants["E2"] = ctx.E2;
  r.refinement_stable = std::abs(C_f) <= tol.fit_slack * std::max(std::abs(C_c), 0.5);
  const double C_verify = tol.fit_slack * std::max(C_c, 0.0) + tol.quantitative;
  ArgMin am;
  for (const FlowState* st : states_in(fine.traj, ctx.eps, ctx.T))
    for (size_t i = 0; i < st->u.values.size(); ++i)
      am.feed(st->u.values[i] - (bound(ctx.psi_fine, *st, i) - C_verify), st->t,
              fine.geom().grid().node(int(i)));
  finish(r, am, tol.quantitative * std::max(1.0, std::abs(C_c)));
  if (!r.refinement_stable) r.verdict = Verdict::Fails;
  return r;
}

namespace {

// The constant multiplying (Psi_t - phi_t): smallest A with
// (A eps / 6S) omega + chi >= omega nodewise, plus unit headroom.
double dot_lower_A(const LabRun& run, const EstimateContext& ctx) {
  double need = 0.0;
  for (size_t i = 0; i < run.geom().g0_density.size(); ++i)
    need = std::max(need, 1.0 - run.path.chi_density[i] / run.geom().g0_density[i]);
  return need <= 0 ? 1.0 : (6.0 * ctx.S / ctx.eps) * need + 1.0;
}

}  // namespace

EstimateReport check_dot_lower(const LabRun& coarse, const LabRun& fine,
                               const EstimateContext& ctx, const Tolerances& tol) {
  EstimateReport r;
  r.id = "dot-lower";
  const double A = dot_lower_A(coarse, ctx);
  r.constants["A"] = A;
  auto deficit = [&](const LabRun& run, const RadialProfile& psi, const FlowState& st,
                     std::vector<double>& dot, size_t i) {
    double Psi = (1.0 - st.t / (2.0 * ctx.S)) * psi.values[i];
    return std::log(st.t - ctx.eps) + A * (Psi - st.u.values[i]) - dot[i];
  };
  auto fit_C = [&](const LabRun& run, const RadialProfile& psi) {
    double m = -std::numeric_limits<double>::infinity();
    for (const FlowState* st : states_in(run.traj, ctx.eps + 1e-9, ctx.T)) {
      auto dot = ma_log_density(*st, run.geom(), run.path);
      for (size_t i = 0; i < dot.size(); ++i)
        m = std::max(m, deficit(run, psi, *st, dot, i));
    }
    return m;
  };
  double C_c = fit_C(coarse, ctx.psi_coarse);
  double C_f = fit_C(fine, ctx.psi_fine);
  r.constants["C"] = C_c;
  r.constants["C_refined"] = C_f;
  r.refinement_stable = std::abs(C_f) <= tol.fit_slack * std::max(std::abs(C_c), 0.5);
  // Proof-side consistency: (A eps / 6S) omega + chi >= omega.
  double cons = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < coarse.geom().g0_density.size(); ++i)
    cons = std::min(cons, (A * ctx.eps / (6.0 * ctx.S)) +
                              coarse.path.chi_density[i] / coarse.geom().g0_density[i] - 1.0);
  r.constants["positivity_check"] = cons;
  const double C_verify = tol.fit_slack * std::max(C_c, 0.0) + tol.quantitative;
  ArgMin am;
  for (const FlowState* st : states_in(fine.traj, ctx.eps + 1e-9, ctx.T)) {
    auto dot = ma_log_density(*st, fine.geom(), fine.path);
    for (size_t i = 0; i < dot.size(); ++i)
      am.feed(C_verify - deficit(fine, ctx.psi_fine, *st, dot, i), st->t,
              fine.geom().grid().node(int(i)));
  }
  finish(r, am, tol.quantitative * std::max(1.0, std::abs(C_c)));
  if (cons < -1e-9 || !r.refinement_stable) r.verdict = Verdict::Fails;
  return r;
}

EstimateReport check_c2(const LabRun& coarse, const LabRun& fine,
                        const EstimateContext& ctx, const Tolerances& tol) {
  EstimateReport r;
  r.id = "c2-trace";
  // A from the proof recipe: curvature bound B and the chi trace bound C1.
  double C1 = 0.0, B = 0.0;
  for (size_t i = 0; i < coarse.geom().g0_density.size(); ++i) {
    C1 = std::max(C1, std::abs(coarse.path.chi_density[i]) / coarse.geom().g0_density[i]);
    B = std::max(B, -coarse.geom().ricci_density[i] / coarse.geom().g0_density[i]);
  }
  const double A = (6.0 * ctx.S / ctx.eps) * ((B + C1) * ctx.T + 2.0);
  r.constants["A"] = A;
  r.constants["B"] = B;
  r.constants["C1"] = C1;

  auto fit_C = [&](const LabRun& run, const RadialProfile& psi) {
    double m = -std::numeric_limits<double>::infinity();
    for (const FlowState* st : states_in(run.traj, ctx.eps, ctx.T)) {
      auto dot = ma_log_density(*st, run.geom(), run.path);
      for (size_t i = 0; i < dot.size(); ++i)
        m = std::max(m, (st->t - ctx.eps) * dot[i] + A * psi.values[i]);
    }
    return m;
  };
  double C_c = fit_C(coarse, ctx.psi_coarse);
  double C_f = fit_C(fine, ctx.psi_fine);
  r.constants["C"] = C_c;
  r.constants["C_refined"] = C_f;
  r.refinement_stable = std::abs(C_f) <= tol.fit_slack * std::max(std::abs(C_c), 0.5);

  const double C_verify = tol.fit_slack * std::max(C_c, 0.0) + tol.quantitative;
  ArgMin am;
  double left_margin = std::numeric_limits<double>::infinity();
  long window_nodes = 0, total_nodes = 0;
  for (const FlowState* st : states_in(fine.traj, ctx.eps, ctx.T)) {
    auto dot = ma_log_density(*st, fine.geom(), fine.path);
    for (size_t i = 0; i < dot.size(); ++i) {
      am.feed(-A * ctx.psi_fine.values[i] + C_verify - (st->t - ctx.eps) * dot[i], st->t,
              fine.geom().grid().node(int(i)));
      // Left inequality on the window where the trace ratio reaches 1.
      ++total_nodes;
      if (dot[i] >= -tol.quantitative) {
        ++window_nodes;
        left_margin = std::min(left_margin, (st->t - ctx.eps) * dot[i]);
      }
    }
  }
  r.constants["left_window_fraction"] =
      total_nodes ? double(window_nodes) / double(total_nodes) : 0.0;
  r.constants["left_margin"] = left_margin;
  finish(r, am, tol.quantitative * std::max(1.0, std::abs(C_c)));
  if (left_margin < -tol.quantitative || !r.refinement_stable) r.verdict = Verdict::Fails;
  return r;
}

EstimateReport check_more_estimates(const LabRun& coarse, const LabRun& fine,
                                    const RadialProfile& phi1_c, const RadialProfile& phi2_c,
                                    const RadialProfile& phi1_f, const RadialProfile& phi2_f,
                                    double delta, double C1, const Tolerances& tol) {
  EstimateReport r;
  r.id = "more-estimates";
  if (!(delta > 0 && delta < 0.5))
    throw std::invalid_argument("check_more_estimates: delta must lie in (0, 1/2)");
  // Hypothesis guard on the initial data.
  const auto& st0 = coarse.traj.states[0];
  auto dot0 = ma_log_density(st0, coarse.geom(), coarse.path);
  auto lap0 = d2(st0.u);
  for (size_t i = 0; i < dot0.size(); ++i) {
    if (dot0[i] < C1 * phi1_c.values[i] - 1e-7)
      throw std::invalid_argument("check_more_estimates: hypothesis dot(phi0) >= C1 phi1 fails");
    if (st0.u.values[i] < delta * phi2_c.values[i] - 1e-7)
      throw std::invalid_argument("check_more_estimates: hypothesis phi0 >= delta phi2 fails");
    double lap = lap0[i] / coarse.geom().g0_density[i];
    if (lap > std::exp(-C1 * phi1_c.values[i]) + 1e-7)
      throw std::invalid_argument(
          "check_more_estimates: hypothesis Delta phi0 <= e^{-C1 phi1} fails");
  }

  // Velocity bound: feasible C2 with dot(phi_t) >= C2 (phi2 + 1) + C1 phi1.
  auto c2_interval = [&](const LabRun& run, const RadialProfile& p1, const RadialProfile& p2,
                         double& lo, double& hi) {
    lo = -std::numeric_limits<double>::infinity();
    hi = std::numeric_limits<double>::infinity();
    for (size_t k = 1; k < run.traj.states.size(); ++k) {
      const auto& st = run.traj.states[k];
      auto dot = ma_log_density(st, run.geom(), run.path);
      for (size_t i = 0; i < dot.size(); ++i) {
        double rest = dot[i] - C1 * p1.values[i];
        double w = p2.values[i] + 1.0;
        if (std::abs(w) < 1e-9) continue;
        if (w > 0) hi = std::min(hi, rest / w);
        else lo = std::max(lo, rest / w);
      }
    }
  };
  double lo_c, hi_c, lo_f, hi_f;
  c2_interval(coarse, phi1_c, phi2_c, lo_c, hi_c);
  c2_interval(fine, phi1_f, phi2_f, lo_f, hi_f);
  const bool feasible_c = lo_c <= hi_c + tol.quantitative;
  const bool feasible_f = lo_f <= hi_f + tol.quantitative;
  const double C2 = feasible_c ? std::max(lo_c, std::min(hi_c, 0.0)) : lo_c;
  r.constants["C2"] = C2;
  r.constants["C2_lo"] = lo_c;
  r.constants["C2_hi"] = hi_c;
  double vel_margin = std::numeric_limits<double>::infinity();
  for (size_t k = 1; k < fine.traj.states.size(); ++k) {
    const auto& st = fine.traj.states[k];
    auto dot = ma_log_density(st, fine.geom(), fine.path);
    for (size_t i = 0; i < dot.size(); ++i)
      vel_margin = std::min(vel_margin, dot[i] - C1 * phi1_f.values[i] -
                                            C2 * (phi2_f.values[i] + 1.0));
  }
  r.constants["velocity_margin"] = vel_margin;

  // Trace bound: tr <= C (1 + e^{-C1 phi1 - delta phi2}).
  auto fit_trace = [&](const LabRun& run, const RadialProfile& p1, const RadialProfile& p2) {
    double m = 0.0;
    for (size_t k = 1; k < run.traj.states.size(); ++k) {
      const auto& st = run.traj.states[k];
      auto dot = ma_log_density(st, run.geom(), run.path);
      for (size_t i = 0; i < dot.size(); ++i) {
        double envelope = 1.0 + std::exp(-C1 * p1.values[i] - delta * p2.values[i]);
        m = std::max(m, std::exp(dot[i]) / envelope);
      }
    }
    return m;
  };
  double Ctr_c = fit_trace(coarse, phi1_c, phi2_c);
  double Ctr_f = fit_trace(fine, phi1_f, phi2_f);
  r.constants["C_trace"] = Ctr_c;
  r.constants["C_trace_refined"] = Ctr_f;
  r.refinement_stable = Ctr_f <= tol.fit_slack * std::max(Ctr_c, 0.5) && feasible_f;
  ArgMin am;
  for (size_t k = 1; k < fine.traj.states.size(); ++k) {
    const auto& st = fine.traj.states[k];
    auto dot = ma_log_density(st, fine.geom(), fine.path);
    for (size_t i = 0; i < dot.size(); ++i) {
      double envelope = 1.0 + std::exp(-C1 * phi1_f.values[i] - delta * phi2_f.values[i]);
      am.feed(tol.fit_slack * Ctr_c * envelope - std::exp(dot[i]), st.t,
              fine.geom().grid().node(int(i)));
    }
  }
  finish(r, am, tol.quantitative * std::max(1.0, Ctr_c));
  if (!feasible_c || vel_margin < -tol.quantitative * std::max(1.0, std::abs(C2)) ||
      !r.refinement_stable)
    r.verdict = Verdict::Fails;
  return r;
}

EstimateReport check_lelong_decay(const LabRun& coarse, const LabRun& fine,
                                  const SingularitySpec& spec,
                                  const LelongDecayParams& params, const Tolerances& tol) {
  EstimateReport r;
  r.id = "lelong-decay";
  const double nu0 = spec.lelong();
  if (!(spec.a > 0) || !(1.0 / (2.0 * spec.index()) < coarse.path.t_max)) {
    r.verdict = Verdict::Skipped;
    r.skipped_reason = "requires a pole with 1/(2c) < t_max";
    return r;
  }
  double worst = std::numeric_limits<double>::infinity();
  bool sensitive = false;
  for (double t : params.sample_times) {
    const auto& st = coarse.traj.at_time(t);
    auto m = lelong_number(st.u, params.window_lo, params.window_hi);
    sensitive = sensitive || !m.confident;
    r.constants["nu_at_" + std::to_string(t)] = m.nu;
    worst = std::min(worst, m.nu - (nu0 - 2.0 * t - params.envelope_slack));
    if (t < 0.95 * nu0 / 2.0 && m.nu < params.positivity_floor) {
      r.verdict = Verdict::Fails;
      r.note("positivity lost before nu0/2");
    }
  }
  r.margin = worst;
  if (worst < 0) r.verdict = Verdict::Fails;
  if (sensitive) r.note("lelong window fit flagged low confidence");

  // Boundedness past nu0/2: grid-stable sup norm and settled depth iterates.
  if (params.bounded_time > 0) {
    const auto& uc = coarse.traj.at_time(params.bounded_time).u;
    const auto& uf = fine.traj.at_time(params.bounded_time).u;
    double sc = sup_norm(uc.values), sf = sup_norm(uf.values);
    r.constants["sup_bounded_coarse"] = sc;
    r.constants["sup_bounded_fine"] = sf;
    bool stable = std::abs(sc - sf) <= 0.05 * std::max(1.0, sf);
    if (coarse.maximal && coarse.maximal->per_depth.size() >= 2) {
      const auto& pd = coarse.maximal->per_depth;
      double a = sup_norm(pd[pd.size() - 1].at_time(params.bounded_time).u.values);
      double b = sup_norm(pd[pd.size() - 2].at_time(params.bounded_time).u.values);
      stable = stable && std::abs(a - b) <= 0.05 * std::max(1.0, a);
      r.constants["sup_bounded_depth_gap"] = std::abs(a - b);
    }
    r.refinement_stable = stable;
    if (!stable) r.verdict = Verdict::Fails;
  }

  // Supersolution domination at the sampled times.
  const double gamma = 1.0 / spec.a;
  RadialProfile p = spec.limit_profile(coarse.geom().grid());
  double dom_margin = std::numeric_limits<double>::infinity();
  for (double t : params.sample_times) {
    if (t > 1.0 / gamma) continue;
    RadialProfile sup = supersolution(p, gamma, t, coarse.geom());
    const auto& st = coarse.traj.at_time(t);
    for (size_t i = 0; i < sup.values.size(); ++i)
      dom_margin = std::min(dom_margin, sup.values[i] - st.u.values[i]);
  }
  r.constants["supersolution_margin"] = dom_margin;
  if (dom_margin < -params.supersolution_tol) r.verdict = Verdict::Fails;
  (void)tol;
  return r;
}

EstimateReport check_lower_beta(const LabRun& run, double beta,
                                const std::vector<double>& sample_times,
                                const Tolerances& tol) {
  EstimateReport r;
  r.id = "lower-bound-beta";
  if (!(2.0 * beta > 1.0 / run.path.t_max))
    throw std::invalid_argument("check_lower_beta: requires 2 beta > 1/t_max");
  if (sample_times.size() < 2)
    throw std::invalid_argument("check_lower_beta: needs at least two sample times");
  std::vector<double> Cs;
  for (double t : sample_times) {
    const auto& st = run.traj.at_time(t);
    double C = 0.0;
    for (size_t i = 0; i < st.u.values.size(); ++i)
      C = std::max(C, (1.0 - 2.0 * beta * t) * run.phi0.values[i] - st.u.values[i]);
    Cs.push_back(C);
    r.constants["C_at_" + std::to_string(t)] = C;
  }
  // sample_times decrease toward zero: C(t) must trend down to zero with them.
  bool ok = true;
  for (size_t k = 1; k < Cs.size(); ++k)
    if (Cs[k] > Cs[k - 1] + 1e-6) ok = false;
  double last = Cs.back(), first = Cs.front();
  if (last > 0.3 * std::max(first, 1e-9) + 1e-6) ok = false;
  r.margin = 0.3 * std::max(first, 1e-9) + 1e-6 - last;
  if (!ok) r.verdict = Verdict::Fails;
  (void)tol;
  return r;
}

EstimateReport check_stability(const std::vector<FlowTrajectory>& perturbed,
                               const FlowTrajectory& limit, double t_eval,
                               double final_tol, const Tolerances& tol) {
  EstimateReport r;
  r.id = "stability";
  if (perturbed.empty()) throw std::invalid_argument("check_stability: no trajectories");
  const auto& ul = limit.at_time(t_eval).u;
  auto ulxx = d2(ul);
  std::vector<double> sup, c2;
  for (const auto& traj : perturbed) {
    const auto& u = traj.at_time(t_eval).u;
    sup.push_back(max_abs_diff(u, ul));
    c2.push_back(max_abs_diff(d2(u), ulxx));
  }
  for (size_t j = 0; j < sup.size(); ++j) {
    r.constants["sup_" + std::to_string(j)] = sup[j];
    r.constants["c2_" + std::to_string(j)] = c2[j];
  }
  bool mono = true;
  for (size_t j = 1; j < sup.size(); ++j)
    if (sup[j] > sup[j - 1] + tol.ordering || c2[j] > c2[j - 1] + tol.ordering) mono = false;
  r.margin = final_tol - std::max(sup.back(), c2.back());
  if (!mono || r.margin < 0) r.verdict = Verdict::Fails;
  if (!mono) r.note("distances not monotone in the perturbation index");
  return r;
}

EstimateReport check_zero_convergence(const LabRun& coarse, const LabRun& fine,
                                      const RadialProfile& phi0_c,
                                      const RadialProfile& phi0_f,
                                      const ZeroConvergenceParams& params,
                                      const Tolerances& tol) {
  EstimateReport r;
  r.id = "zero-convergence";
  std::vector<double> dyadic;
  for (int k = 0; k <= params.k_max; ++k) dyadic.push_back(params.t0 * std::pow(0.5, k));

  // The two-time constant C of u_t = phi_t + Ct - t log t + t log 4, computed
  // per resolution over the dyadic pairs on the region.
  auto two_time_C = [&](const LabRun& run, int k_hi) {
    double C = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < k_hi; ++k) {
      const auto& a = run.traj.at_time(dyadic[size_t(k)]).u;       // time t
      const auto& b = run.traj.at_time(dyadic[size_t(k) + 1]).u;   // time t/2
      const double t = dyadic[size_t(k)];
      for (int i = 0; i < a.size(); ++i) {
        double s = a.grid.node(i);
        if (s < params.region_lo || s > params.region_hi) continue;
        C = std::max(C, (2.0 / t) * (b.values[size_t(i)] - a.values[size_t(i)]) -
                            std::log(2.0 / t));
      }
    }
    return C;
  };
  const double C_early = two_time_C(coarse, std::min(3, params.k_max));
  const double C_all = two_time_C(coarse, params.k_max);
  const double C_fine = two_time_C(fine, params.k_max);
  r.constants["C_two_time"] = C_all;
  r.constants["C_two_time_early"] = C_early;
  r.constants["C_two_time_refined"] = C_fine;
  const bool uniform = C_all <= std::max(2.0 * std::max(C_early, 0.25), C_early + 0.5);
  r.refinement_stable =
      std::abs(C_fine - C_all) <= std::max(0.5, 0.5 * std::abs(C_all)) && uniform;

  // Dyadic monotonicity margin with each resolution's own constant.
  auto mono_margin = [&](const LabRun& run, double C, ArgMin& am) {
    for (int k = 0; k < params.k_max; ++k) {
      const double t = dyadic[size_t(k)];
      const auto& a = run.traj.at_time(t).u;
      const auto& b = run.traj.at_time(t / 2.0).u;
      for (int i = 0; i < a.size(); ++i) {
        double s = a.grid.node(i);
        if (s < params.region_lo || s > params.region_hi) continue;
        double gap = (a.values[size_t(i)] - b.values[size_t(i)]) +
                     (t / 2.0) * (C + std::log(2.0 / t));
        am.feed(gap, t, s);
      }
    }
  };
  ArgMin am;
  mono_margin(coarse, C_all, am);
  mono_margin(fine, C_fine, am);

  // Convergence to phi0 at the dyadic times on the fine run.
  std::vector<double> dist;
  for (double t : dyadic)
    dist.push_back(window_diff(fine.traj.at_time(t).u, phi0_f, params.region_lo,
                               params.region_hi));
  for (size_t k = 0; k < dist.size(); ++k)
    r.constants["sup_dist_k" + std::to_string(k)] = dist[k];
  bool decaying = dist.back() <= params.sup_tol;
  for (size_t k = 1; k < dist.size(); ++k)
    if (dist[k] > 1.2 * dist[k - 1] + 1e-6) decaying = false;

  if (params.c2_branch) {
    const auto& uf = fine.traj.at_time(dyadic.back()).u;
    auto du = [&](const RadialProfile& p) {
      std::vector<double> out(p.values.size(), 0.0);
      const double h = p.grid.spacing();
      for (size_t i = 1; i + 1 < p.values.size(); ++i)
        out[i] = (p.values[i + 1] - p.values[i - 1]) / (2.0 * h);
      return out;
    };
    double d1 = 0.0, d2dist = 0.0;
    auto dl = du(uf), dr = du(phi0_f);
    auto xl = d2(uf), xr = d2(phi0_f);
    const auto& g = fine.geom().grid();
    for (int i = 1; i + 1 < g.n_points; ++i) {
      double s = g.node(i);
      if (s < params.region_lo || s > params.region_hi) continue;
      d1 = std::max(d1, std::abs(dl[size_t(i)] - dr[size_t(i)]));
      d2dist = std::max(d2dist, std::abs(xl[size_t(i)] - xr[size_t(i)]));
    }
    r.constants["d1_dist"] = d1;
    r.constants["d2_dist"] = d2dist;
    if (d1 > params.sup_tol || d2dist > params.sup_tol) decaying = false;
  }

  finish(r, am, tol.ordering);
  if (!decaying || !uniform || !r.refinement_stable) r.verdict = Verdict::Fails;
  if (!decaying) r.note("sup distance did not decay below the threshold");
  (void)phi0_c;
  return r;
}

}  // namespace krf
