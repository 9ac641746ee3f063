// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "problems.hpp"

namespace {

using namespace phaseopt;
using namespace phaseopt::testing;

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
  return buf;
}

double max_abs(const Trajectory& t) { return std::max(std::abs(t.min()), std::abs(t.max())); }

Outcome stationarity() {
  const Problem p = uniform_problem(64, 128, 0.5, 0.0);
  const Trajectory u(p.tgrid.levels(), p.grid.cells(), 0.0);
  const auto sol = solve_state(p.data, u, p.grid, p.tgrid, p.pot, p.cfg);
  const Trajectory half(p.tgrid.levels(), p.grid.cells(), 0.5);
  const double dev = std::max(max_abs(sol.state.rho - half), max_abs(sol.state.mu));
  return {dev <= 1e-12, fmt("max deviation %.3g", dev)};
}

Outcome bounds() {
  const Problem p = default_problem();
  int passed = 0;
  double rho_lo = 1.0, rho_hi = 0.0, mu_lo = INFINITY;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Trajectory u = random_control(p.grid, p.tgrid, 0.0, 1.0, seed);
    const auto sol = solve_state(p.data, u, p.grid, p.tgrid, p.pot, p.cfg);
    const auto rep = bounds_check(sol.state, sol.diagnostics);
    passed += rep.pass ? 1 : 0;
    rho_lo = std::min(rho_lo, rep.rho_lower);
    rho_hi = std::max(rho_hi, rep.rho_upper);
    mu_lo = std::min(mu_lo, rep.mu_lower);
  }
  return {passed == 10, fmt("%g/10 runs pass, rho in [%.4f, %.4f], min mu %.3g", passed, rho_lo, rho_hi, mu_lo)};
}

Outcome ode_oracle() {
  std::vector<double> err;
  for (int steps : {128, 256}) {
    const Problem p = uniform_problem(64, steps, 0.4, 0.2);
    const Trajectory u(p.tgrid.levels(), p.grid.cells(), 0.1);
    err.push_back(ode_oracle_check(p.data, u, p.grid, p.tgrid, p.pot, p.cfg).max_error);
  }
  const double ratio = err[1] / err[0];
  return {err[0] <= 5e-3 && ratio >= 0.35 && ratio <= 0.65,
          fmt("error %.3g at N=128, %.3g at N=256, ratio %.3f", err[0], err[1], ratio)};
}

Outcome tangent_remainder() {
  const Problem p = default_problem();
  const Trajectory u = interior_control(p, 1);
  double lo = INFINITY, hi = -INFINITY;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rep = tangent_remainder_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, random_direction(p, 100 + seed),
                                             {1e-1, 3e-2, 1e-2, 3e-3});
    if (!rep.slope) {
      ok = false;
      continue;
    }
    lo = std::min(lo, *rep.slope);
    hi = std::max(hi, *rep.slope);
    ok = ok && *rep.slope >= 1.7 && *rep.slope <= 2.3;
  }
  return {ok, fmt("slopes in [%.4f, %.4f] over 5 directions", lo, hi)};
}

Outcome duality() {
  const Problem p = default_problem();
  const Trajectory u = interior_control(p, 2);
  const auto sol = solve_state(p.data, u, p.grid, p.tgrid, p.pot, p.cfg);
  const auto adj = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, AdjointMode::Discrete);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Trajectory h = random_direction(p, 200 + seed);
    const auto t = solve_tangent(sol.state, h, p.data, p.grid, p.tgrid, p.pot, p.cfg);
    const auto d = duality_pairing(sol.state, t, adj, h, p.data, p.grid, p.tgrid);
    worst = std::max(worst, std::abs(d.lhs - d.rhs) / (1.0 + std::abs(d.lhs)));
  }

  std::vector<double> mismatch;
  for (int f : {1, 2, 4}) {
    const Problem q = default_problem(64 * f, 128 * f);
    const auto uq = space_time(q, [](double t, double x) { return 0.5 + 0.2 * std::sin(kPi * t) * std::cos(kPi * x); });
    const auto h = space_time(q, [](double t, double x) { return std::sin(2 * kPi * t) + 0.5 * std::cos(2 * kPi * x); });
    const auto s = solve_state(q.data, uq, q.grid, q.tgrid, q.pot, q.cfg);
    const auto a = solve_adjoint(s.state, q.data, q.grid, q.tgrid, q.pot, q.cfg, AdjointMode::Pde);
    const auto t = solve_tangent(s.state, h, q.data, q.grid, q.tgrid, q.pot, q.cfg);
    const auto d = duality_pairing(s.state, t, a, h, q.data, q.grid, q.tgrid);
    mismatch.push_back(std::abs(d.lhs - d.rhs));
  }
  const double r1 = mismatch[0] / mismatch[1];
  const double r2 = mismatch[1] / mismatch[2];
  return {worst <= 1e-8 && r1 >= 1.5 && r2 >= 1.5,
          fmt("discrete max rel mismatch %.3g; pde mismatch reductions %.3f, %.3f", worst, r1, r2)};
}

Outcome gradient_check() {
  const Problem p = default_problem();
  const Trajectory u = interior_control(p, 3);
  double lo = INFINITY, hi = -INFINITY, worst_rel = 0.0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rep = fd_gradient_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u, random_direction(p, 300 + seed),
                                       {1e-1, 1e-2, 1e-3, 1e-4});
    const double rel = rep.ladder.back().error / std::abs(rep.adjoint_derivative);
    worst_rel = std::max(worst_rel, rel);
    if (!rep.slope) {
      ok = false;
      continue;
    }
    lo = std::min(lo, *rep.slope);
    hi = std::max(hi, *rep.slope);
    ok = ok && *rep.slope >= 0.8 && *rep.slope <= 1.2 && rel <= 1e-4;
  }
  return {ok, fmt("slopes in [%.4f, %.4f], max rel error at 1e-4 %.3g", lo, hi, worst_rel)};
}

Outcome adjoint_modes() {
  std::vector<double> gap;
  for (int steps : {64, 128, 256}) {
    const Problem p = default_problem(64, steps);
    const auto u = space_time(p, [](double t, double x) { return 0.5 + 0.3 * std::sin(3.0 * t) * std::cos(2.0 * x); });
    const auto sol = solve_state(p.data, u, p.grid, p.tgrid, p.pot, p.cfg);
    const auto a = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, AdjointMode::Discrete);
    const auto b = solve_adjoint(sol.state, p.data, p.grid, p.tgrid, p.pot, p.cfg, AdjointMode::Pde);
    double worst = 0.0;
    for (int k = 0; k < p.tgrid.levels(); ++k) worst = std::max(worst, norm(p.grid, InnerKind::L2, a.q[k] - b.q[k]));
    gap.push_back(worst);
  }
  const double r1 = gap[0] / gap[1];
  const double r2 = gap[1] / gap[2];
  return {r1 >= 1.3 && r2 >= 1.3, fmt("gaps %.3g, %.3g, %.3g; reductions %.3f", gap[0], gap[1], gap[2], r1) +
                                      fmt(", %.3f", r2)};
}

Outcome optimization() {
  Problem p = default_problem();
  const auto dagger = space_time(p, [](double t, double x) { return 0.5 + 0.3 * std::sin(kPi * t) * std::cos(kPi * x); });
  const auto target = solve_state(p.data, dagger, p.grid, p.tgrid, p.pot, p.cfg);
  p.data.rho_T = target.state.rho[p.tgrid.steps()];
  p.data.mu_T = target.state.mu;

  OptimizerConfig oc;
  oc.max_iters = 200;
  oc.stat_tol = 1e-9;
  const Trajectory u0(p.tgrid.levels(), p.grid.cells(), 0.0);
  const auto res = projected_gradient_descent(p.data, p.grid, p.tgrid, p.pot, p.cfg, oc, u0);

  bool monotone = true;
  for (std::size_t i = 1; i < res.J_history.size(); ++i) monotone = monotone && res.J_history[i] <= res.J_history[i - 1];
  const auto initial = solve_state(p.data, u0, p.grid, p.tgrid, p.pot, p.cfg);
  const double tracking_ratio =
      tracking_cost(res.state, p.data, p.grid, p.tgrid) / tracking_cost(initial.state, p.data, p.grid, p.tgrid);
  const double kkt = res.kkt_history.back();
  const Trajectory fixed = project_control(-1.0 / p.data.beta2 * res.adjoint.q, p.data.U_bound);
  const double fp = norm(p.grid, p.tgrid, res.u_opt - fixed, kControlRule);
  const double bound = 1e-5 * (1.0 + norm(p.grid, p.tgrid, res.u_opt, kControlRule));
  const bool ok = (kkt <= 1e-6 || tracking_ratio <= 0.1) && res.iterations <= 200 && monotone && fp <= bound;
  return {ok, fmt("%g iterations, kkt %.3g, tracking ratio %.3g, fixed-point residual %.3g", res.iterations, kkt,
                  tracking_ratio, fp) +
                  fmt(" (bound %.3g)", bound) + (monotone ? ", J nonincreasing" : ", J increased")};
}

Outcome bang_bang() {
  Problem p = default_problem();
  p.data.beta2 = 0.0;
  p.data.rho_T = Field::Constant(p.grid.cells(), 0.5);
  p.data.mu_T = Trajectory(p.tgrid.levels(), sample(p.grid, [](double x, double) { return 0.2 + std::cos(kPi * x); }));
  OptimizerConfig oc;
  oc.max_iters = 2000;
  oc.stat_tol = 1e-8;
  const auto res = projected_gradient_descent(p.data, p.grid, p.tgrid, p.pot, p.cfg, oc,
                                              Trajectory(p.tgrid.levels(), p.grid.cells(), 0.0));
  const bool converged = res.termination == Termination::Stationary;

  // Levels 1..N carry the control.
  int total = 0, decided = 0, violations = 0;
  for (int k = 1; k < p.tgrid.levels(); ++k) {
    for (int i = 0; i < p.grid.cells(); ++i) {
      ++total;
      const double q = res.adjoint.q[k][i];
      if (std::abs(q) <= 1e-6) continue;
      ++decided;
      const double expected = q > 0.0 ? 0.0 : p.data.U_bound[k][i];
      if (res.u_opt[k][i] != expected) ++violations;
    }
  }
  const double fraction = static_cast<double>(decided) / total;
  return {converged && fraction >= 0.9 && violations == 0,
          fmt("%g iterations, kkt %.3g, |q| > 1e-6 on %.4f of cells, %g sign-rule violations", res.iterations,
              res.kkt_history.back(), fraction, violations) +
              (converged ? "" : ", not converged")};
}

Outcome stability() {
  const Problem p = default_problem();
  const RefinedProblem fine = refine_problem(p.data, p.grid, p.tgrid);
  double hi = 0.0, hi_fine = 0.0, hi_strong = 0.0;
  bool finite = true;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Trajectory u1 = random_control(p.grid, p.tgrid, 0.0, 1.0, 2 * i);
    const Trajectory u2 = random_control(p.grid, p.tgrid, 0.0, 1.0, 2 * i + 1);
    const auto rc = stability_ratio_check(p.data, p.grid, p.tgrid, p.pot, p.cfg, u1, u2);
    const auto rf = stability_ratio_check(fine.data, fine.grid, fine.tgrid, p.pot, p.cfg,
                                          prolong_trajectory(p.grid, fine.grid, u1),
                                          prolong_trajectory(p.grid, fine.grid, u2));
    for (const auto* r : {&rc, &rf}) {
      finite = finite && !r->degenerate && std::isfinite(r->ratio) && std::isfinite(r->ratio_strong);
    }
    hi = std::max(hi, rc.ratio);
    hi_strong = std::max(hi_strong, rc.ratio_strong);
    hi_fine = std::max(hi_fine, rf.ratio);
  }
  const double growth = hi_fine / hi;
  return {finite && growth < 10.0,
          fmt("max ratio %.3g (strong %.3g), refined %.3g, growth %.3f", hi, hi_strong, hi_fine, growth)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"stationarity exactness", stationarity},
      {"bounds under random feasible controls", bounds},
      {"ODE oracle, first order in tau", ode_oracle},
      {"tangent remainder second order", tangent_remainder},
      {"duality identity", duality},
      {"gradient check", gradient_check},
      {"adjoint mode consistency", adjoint_modes},
      {"optimization on the manufactured problem", optimization},
      {"bang-bang structure", bang_bang},
      {"stability ratios", stability},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
