#include "krf/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace krf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense bounded-variable primal simplex for
//   max c.x  s.t.  A x <= b,  l <= x <= u,
// with sparse columns (the capacity LP is tridiagonal plus two slope
// columns).  Slacks s = b - A x are variables n..n+m-1 with bounds [0, inf).
struct BoundedSimplex {
  int n = 0, m = 0;
  // Sparse columns of [A | I].
  std::vector<std::vector<std::pair<int, double>>> cols;
  std::vector<double> c, lo, hi;

  std::vector<int> basis;         // size m, variable index in each row
  std::vector<int> status;        // 0 = nonbasic at lo, 1 = nonbasic at up, 2 = basic
  std::vector<double> xval;       // current value of every variable
  std::vector<double> Binv;       // m x m row-major
  int iterations = 0;

  double& binv(int r, int ccol) { return Binv[size_t(r) * size_t(m) + size_t(ccol)]; }

  void mult_Binv(const std::vector<std::pair<int, double>>& col, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (auto [r, v] : col)
      for (int i = 0; i < m; ++i) out[size_t(i)] += binv(i, r) * v;
  }

  void solve(int max_iters) {
    std::vector<double> w(static_cast<size_t>(m)), ydual(static_cast<size_t>(m)), cb(static_cast<size_t>(m));
    int degenerate_run = 0;
    for (iterations = 0; iterations < max_iters; ++iterations) {
      // Dual prices y = c_B B^{-1}.
      for (int r = 0; r < m; ++r) cb[size_t(r)] = c[size_t(basis[size_t(r)])];
      for (int j = 0; j < m; ++j) {
        double acc = 0;
        for (int r = 0; r < m; ++r) acc += cb[size_t(r)] * binv(r, j);
        ydual[size_t(j)] = acc;
      }
      const bool bland = degenerate_run > 40;
      int q = -1;
      double best = 1e-9;
      for (int j = 0; j < n + m; ++j) {
        if (status[size_t(j)] == 2) continue;
        double d = c[size_t(j)];
        for (auto [r, v] : cols[size_t(j)]) d -= ydual[size_t(r)] * v;
        double gain = status[size_t(j)] == 0 ? d : -d;
        if (gain > (bland ? 1e-9 : best)) {
          q = j;
          if (bland) break;
          best = gain;
        }
      }
      if (q < 0) return;  // optimal

      mult_Binv(cols[size_t(q)], w);
      const int dir = status[size_t(q)] == 0 ? +1 : -1;  // x_q moves up or down
      double limit = hi[size_t(q)] - lo[size_t(q)];      // bound flip distance
      int leave_row = -1;
      int leave_to = 0;  // 0 -> lo, 1 -> up
      for (int r = 0; r < m; ++r) {
        double wr = dir * w[size_t(r)];
        int bi = basis[size_t(r)];
        if (wr > 1e-11) {  // basic decreases toward its lower bound
          double room = (xval[size_t(bi)] - lo[size_t(bi)]) / wr;
          if (room < limit - 1e-15) { limit = room; leave_row = r; leave_to = 0; }
        } else if (wr < -1e-11 && hi[size_t(bi)] < kInf) {
          double room = (hi[size_t(bi)] - xval[size_t(bi)]) / (-wr);
          if (room < limit - 1e-15) { limit = room; leave_row = r; leave_to = 1; }
        }
      }
      if (limit >= kInf / 2)
        throw std::runtime_error("cap_psi: LP unbounded");
      degenerate_run = limit < 1e-12 ? degenerate_run + 1 : 0;

      // Move x_q and the basics.
      xval[size_t(q)] += dir * limit;
      for (int r = 0; r < m; ++r)
        xval[size_t(basis[size_t(r)])] -= dir * limit * w[size_t(r)];

      if (leave_row < 0) {  // bound flip, basis unchanged
        status[size_t(q)] = status[size_t(q)] == 0 ? 1 : 0;
        continue;
      }
      int out_var = basis[size_t(leave_row)];
      xval[size_t(out_var)] = leave_to == 0 ? lo[size_t(out_var)] : hi[size_t(out_var)];
      status[size_t(out_var)] = leave_to;
      basis[size_t(leave_row)] = q;
      status[size_t(q)] = 2;
      // Eta update of B^{-1}.
      const double piv = w[size_t(leave_row)];
      for (int j = 0; j < m; ++j) binv(leave_row, j) /= piv;
      for (int r = 0; r < m; ++r) {
        if (r == leave_row) continue;
        double f = w[size_t(r)];
        if (f == 0.0) continue;
        for (int j = 0; j < m; ++j) binv(r, j) -= f * binv(leave_row, j);
      }
    }
    throw std::runtime_error("cap_psi: simplex iteration limit");
  }
};

}  // namespace

CapResult cap_psi(const CapProblem& problem) {
  const BackgroundGeometry& bg = *problem.bg;
  const SGrid& g = bg.grid();
  const int N = g.n_points;
  const double h = g.spacing();
  const double ih2 = 1.0 / (h * h);
  if (!problem.psi.grid.same_as(g)) throw std::invalid_argument("cap_psi: grid mismatch");
  for (int i : problem.E)
    if (i < 0 || i >= N) throw std::invalid_argument("cap_psi: E index out of range");

  // Feasibility of psi itself (class constraint).
  {
    auto pd = d2(problem.psi);
    for (int i = 0; i < N; ++i)
      if (bg.g0_density[size_t(i)] + pd[size_t(i)] < -1e-9)
        throw std::invalid_argument("cap_psi: psi violates its own class constraint");
    if (problem.psi.slope_minus + bg.g0.slope_minus < -1e-9 ||
        problem.psi.slope_plus > 1e-9)
      throw std::invalid_argument("cap_psi: psi slopes leave the class");
  }
  if (problem.E.empty()) return CapResult{0.0, 0.0, 0, {}};

  BoundedSimplex sp;
  sp.n = N + 2;  // u_0..u_{N-1}, sigma_minus, sigma_plus
  sp.m = N;
  const int SM = N, SP = N + 1;
  sp.cols.assign(size_t(sp.n + sp.m), {});
  sp.c.assign(size_t(sp.n + sp.m), 0.0);
  sp.lo.assign(size_t(sp.n + sp.m), 0.0);
  sp.hi.assign(size_t(sp.n + sp.m), kInf);

  // Rows: -(D2 u)_i <= g0_density_i, so that slack_i = g0'' + (D2 u)_i >= 0.
  auto add = [&](int col, int row, double v) { sp.cols[size_t(col)].push_back({row, v}); };
  for (int i = 0; i < N; ++i) {
    if (i == 0) {
      add(0, 0, ih2);
      add(1, 0, -ih2);
      add(SM, 0, 1.0 / h);
    } else if (i == N - 1) {
      add(N - 2, i, -ih2);
      add(N - 1, i, ih2);
      add(SP, i, -1.0 / h);
    } else {
      add(i - 1, i, -ih2);
      add(i, i, 2.0 * ih2);
      add(i + 1, i, -ih2);
    }
  }
  for (int i = 0; i < sp.m; ++i) add(sp.n + i, i, 1.0);

  // Objective: sum over E of (g0'' + D2 u)_i h = const + h * (D2 rows on x).
  double obj_const = 0.0;
  for (int i : problem.E) {
    obj_const += bg.g0_density[size_t(i)] * h;
    if (i == 0) {
      sp.c[0] += -ih2 * h;
      sp.c[1] += ih2 * h;
      sp.c[size_t(SM)] += -1.0;
    } else if (i == N - 1) {
      sp.c[size_t(N - 2)] += ih2 * h;
      sp.c[size_t(N - 1)] += -ih2 * h;
      sp.c[size_t(SP)] += 1.0;
    } else {
      sp.c[size_t(i - 1)] += ih2 * h;
      sp.c[size_t(i)] += -2.0 * ih2 * h;
      sp.c[size_t(i + 1)] += ih2 * h;
    }
  }

  // Bounds.
  const double big = 1e6;
  for (int i = 0; i < N; ++i) {
    sp.lo[size_t(i)] = problem.psi.values[size_t(i)] - 1.0;
    sp.hi[size_t(i)] = problem.psi.values[size_t(i)];
  }
  sp.lo[size_t(SM)] = -bg.g0.slope_minus;  // slope_minus(g0 + u) >= 0
  sp.hi[size_t(SM)] = big;
  sp.lo[size_t(SP)] = -big;
  sp.hi[size_t(SP)] = bg.mass_omega() + bg.g0.slope_minus - bg.g0.slope_plus;

  // Start: u at psi, sigma_minus at its lower bound, sigma_plus at its upper
  // bound; slacks basic.
  sp.status.assign(size_t(sp.n + sp.m), 0);
  sp.xval.assign(size_t(sp.n + sp.m), 0.0);
  for (int i = 0; i < N; ++i) {
    sp.status[size_t(i)] = 1;
    sp.xval[size_t(i)] = sp.hi[size_t(i)];
  }
  sp.status[size_t(SM)] = 0;
  sp.xval[size_t(SM)] = sp.lo[size_t(SM)];
  sp.status[size_t(SP)] = 1;
  sp.xval[size_t(SP)] = sp.hi[size_t(SP)];
  sp.basis.resize(size_t(sp.m));
  sp.Binv.assign(size_t(sp.m) * size_t(sp.m), 0.0);
  for (int i = 0; i < sp.m; ++i) {
    sp.basis[size_t(i)] = sp.n + i;
    sp.status[size_t(sp.n + i)] = 2;
    sp.binv(i, i) = 1.0;
  }
  for (int i = 0; i < sp.m; ++i) {
    double ax = 0;
    for (int j = 0; j < sp.n; ++j)
      for (auto [r, v] : sp.cols[size_t(j)])
        if (r == i) ax += v * sp.xval[size_t(j)];
    double slack = bg.g0_density[size_t(i)] - ax;
    if (slack < -1e-9)
      throw std::invalid_argument("cap_psi: infeasible start (psi not admissible)");
    sp.xval[size_t(sp.n + i)] = std::max(slack, 0.0);
  }

  sp.solve(200 * sp.m + 2000);

  CapResult out;
  out.iterations = sp.iterations;
  out.u_opt.assign(size_t(N), 0.0);
  for (int i = 0; i < N; ++i) out.u_opt[size_t(i)] = sp.xval[size_t(i)];
  double val = obj_const;
  for (int j = 0; j < sp.n; ++j) val += sp.c[size_t(j)] * sp.xval[size_t(j)];
  out.value = val;

  // Complementary slackness / feasibility certificate.
  double resid = 0.0;
  RadialProfile uprof{g, out.u_opt, sp.xval[size_t(SM)], sp.xval[size_t(SP)]};
  auto uxx = d2(uprof);
  for (int i = 0; i < N; ++i) {
    double y = bg.g0_density[size_t(i)] + uxx[size_t(i)];
    resid = std::max(resid, std::max(0.0, -y));
    resid = std::max(resid, std::max(0.0, sp.lo[size_t(i)] - out.u_opt[size_t(i)]));
    resid = std::max(resid, std::max(0.0, out.u_opt[size_t(i)] - sp.hi[size_t(i)]));
  }
  out.cs_residual = resid;
  return out;
}

KolodziejResult kolodziej_extinction(const DecayFunction& d, double t0, double floor) {
  if (d.t.size() != d.g.size() || d.t.size() < 2)
    throw std::invalid_argument("kolodziej_extinction: bad sampling");
  if (!(d.C > 0)) throw std::invalid_argument("kolodziej_extinction: C must be > 0");
  for (size_t k = 1; k < d.t.size(); ++k) {
    if (!(d.t[k] > d.t[k - 1]))
      throw std::invalid_argument("kolodziej_extinction: times must increase");
    if (d.g[k] > d.g[k - 1] + 1e-12)
      throw std::invalid_argument("kolodziej_extinction: samples not non-increasing");
  }
  // Locate g(t0) by the sample at or just after t0 (right continuity).
  size_t i0 = 0;
  while (i0 + 1 < d.t.size() && d.t[i0] < t0 - 1e-12) ++i0;
  if (d.g[i0] > 1.0 / (2.0 * d.C) + 1e-12)
    throw std::invalid_argument("kolodziej_extinction: g(t0) exceeds 1/(2C)");

  KolodziejResult out;
  out.t_star = t0 + 2.0;
  const double tol = 1e-10;
  for (size_t i = 0; i < d.t.size() && out.hypothesis_ok; ++i) {
    for (size_t j = i + 1; j < d.t.size(); ++j) {
      double s = d.t[j] - d.t[i];
      if (s > 1.0 + 1e-12) break;
      if (s * d.g[j] > d.C * d.g[i] * d.g[i] + tol) {
        out.hypothesis_ok = false;
        out.witness_t = d.t[i];
        out.witness_s = s;
        break;
      }
    }
  }
  if (!out.hypothesis_ok) return out;
  out.extinct = true;
  for (size_t i = 0; i < d.t.size(); ++i)
    if (d.t[i] >= out.t_star - 1e-12 && d.g[i] > floor) out.extinct = false;
  return out;
}

}  // namespace krf
