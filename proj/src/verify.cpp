#include "phaseopt/verify.hpp"

#include "phaseopt/errors.hpp"
#include "phaseopt/linear_solve.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

namespace phaseopt {

std::optional<double> loglog_slope(const std::vector<LadderPoint>& ladder) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (const auto& p : ladder) {
    if (!(p.error > 0.0) || !(p.lambda > 0.0)) continue;
    const double x = std::log(p.lambda);
    const double y = std::log(p.error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::nullopt;
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / denom;
}

namespace {

double reduced_cost(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
                    const SolverConfig& cfg, const Trajectory& u) {
  const auto sol = solve_state(data, u, grid, tgrid, pot, cfg);
  return cost(sol.state, u, data, grid, tgrid);
}

Trajectory perturbed(const Trajectory& u, const Trajectory& h, double lambda, const Trajectory& U_bound, double tol,
                     const char* what) {
  Trajectory v = u + lambda * h;
  require_feasible(v, U_bound, tol, what);
  return v;
}

}  // namespace

FdGradientReport fd_gradient_check(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid,
                                   const Potential& pot, const SolverConfig& cfg, const Trajectory& u,
                                   const Trajectory& h, const std::vector<double>& lambdas) {
  require_on_grids(grid, tgrid, h, "fd_gradient_check direction");
  for (double lambda : lambdas) perturbed(u, h, lambda, data.U_bound, cfg.bound_tol, "fd_gradient_check");

  const auto base = solve_state(data, u, grid, tgrid, pot, cfg);
  const double j0 = cost(base.state, u, data, grid, tgrid);
  const auto adj = solve_adjoint(base.state, data, grid, tgrid, pot, cfg, AdjointMode::Discrete);
  const Trajectory g = reduced_gradient(u, adj.q, data.beta2);

  FdGradientReport rep;
  rep.adjoint_derivative = inner_product(grid, tgrid, g, h, kControlRule);
  const bool zero_direction = h.min() == 0.0 && h.max() == 0.0;
  for (double lambda : lambdas) {
    double err = 0.0;
    if (!zero_direction) {
      const double j1 = reduced_cost(data, grid, tgrid, pot, cfg, u + lambda * h);
      err = std::abs((j1 - j0) / lambda - rep.adjoint_derivative);
    }
    rep.ladder.push_back({lambda, err});
  }
  rep.slope = loglog_slope(rep.ladder);
  return rep;
}

double central_difference(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
                          const SolverConfig& cfg, const Trajectory& u, const Trajectory& h, double lambda) {
  const auto up = perturbed(u, h, lambda, data.U_bound, cfg.bound_tol, "central_difference");
  const auto down = perturbed(u, h, -lambda, data.U_bound, cfg.bound_tol, "central_difference");
  return (reduced_cost(data, grid, tgrid, pot, cfg, up) - reduced_cost(data, grid, tgrid, pot, cfg, down)) /
         (2.0 * lambda);
}

double remainder_norm(const Grid& grid, const TimeGrid& tgrid, const Trajectory& y, const Trajectory& z) {
  require_on_grids(grid, tgrid, y, "remainder_norm y");
  require_on_grids(grid, tgrid, z, "remainder_norm z");
  const double tau = tgrid.tau();
  double y_h1_time = 0.0;
  double y_l2_w = 0.0;
  double y_max_v = 0.0;
  double z_max_h = 0.0;
  double z_l2_v = 0.0;
  for (int k = 0; k < tgrid.levels(); ++k) {
    y_max_v = std::max(y_max_v, inner_product(grid, InnerKind::H1, y[k], y[k]));
    z_max_h = std::max(z_max_h, inner_product(grid, InnerKind::L2, z[k], z[k]));
    if (k == 0) continue;
    const Field dy = (y[k] - y[k - 1]) / tau;
    const double yh = inner_product(grid, InnerKind::L2, y[k], y[k]);
    y_h1_time += tau * (inner_product(grid, InnerKind::L2, dy, dy) + yh);
    const Field ly = grid.laplacian() * y[k];
    y_l2_w += tau * (yh + inner_product(grid, InnerKind::L2, ly, ly));
    z_l2_v += tau * inner_product(grid, InnerKind::H1, z[k], z[k]);
  }
  return std::sqrt(y_h1_time + y_max_v + y_l2_w + z_max_h + z_l2_v);
}

RemainderReport tangent_remainder_check(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid,
                                        const Potential& pot, const SolverConfig& cfg, const Trajectory& u,
                                        const Trajectory& h, const std::vector<double>& lambdas) {
  require_on_grids(grid, tgrid, h, "tangent_remainder_check direction");
  for (double lambda : lambdas) perturbed(u, h, lambda, data.U_bound, cfg.bound_tol, "tangent_remainder_check");

  const auto base = solve_state(data, u, grid, tgrid, pot, cfg);
  const auto tangent = solve_tangent(base.state, h, data, grid, tgrid, pot, cfg);
  RemainderReport rep;
  for (double lambda : lambdas) {
    const auto moved = solve_state(data, u + lambda * h, grid, tgrid, pot, cfg);
    const Trajectory y = moved.state.rho - base.state.rho - lambda * tangent.xi;
    const Trajectory z = moved.state.mu - base.state.mu - lambda * tangent.eta;
    rep.ladder.push_back({lambda, remainder_norm(grid, tgrid, y, z)});
  }
  rep.slope = loglog_slope(rep.ladder);
  return rep;
}

StabilityReport stability_ratio_check(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid,
                                      const Potential& pot, const SolverConfig& cfg, const Trajectory& u1,
                                      const Trajectory& u2) {
  const auto s1 = solve_state(data, u1, grid, tgrid, pot, cfg);
  const auto s2 = solve_state(data, u2, grid, tgrid, pot, cfg);
  const Trajectory du = u1 - u2;
  const Trajectory drho = s1.state.rho - s2.state.rho;
  const Trajectory dmu = s1.state.mu - s2.state.mu;
  const double tau = tgrid.tau();

  auto w_norm2 = [&](const Field& v) {
    const Field lv = grid.laplacian() * v;
    return inner_product(grid, InnerKind::L2, v, v) + inner_product(grid, InnerKind::L2, lv, lv);
  };

  StabilityReport rep;
  double denom = 0.0;
  double max_weak = inner_product(grid, InnerKind::L2, dmu[0], dmu[0]) + inner_product(grid, InnerKind::H1, drho[0], drho[0]);
  double max_strong = inner_product(grid, InnerKind::H1, dmu[0], dmu[0]) + w_norm2(drho[0]);
  double int_weak = 0.0;
  double int_strong = 0.0;
  for (int k = 1; k < tgrid.levels(); ++k) {
    denom += tau * inner_product(grid, InnerKind::L2, du[k], du[k]);
    const Field rho_t = (drho[k] - drho[k - 1]) / tau;
    const Field mu_t = (dmu[k] - dmu[k - 1]) / tau;
    max_weak = std::max(max_weak, inner_product(grid, InnerKind::L2, dmu[k], dmu[k]) +
                                      inner_product(grid, InnerKind::H1, drho[k], drho[k]));
    int_weak += tau * (inner_product(grid, InnerKind::H1, dmu[k], dmu[k]) + inner_product(grid, InnerKind::L2, rho_t, rho_t));
    max_strong = std::max(max_strong, inner_product(grid, InnerKind::H1, rho_t, rho_t) +
                                          inner_product(grid, InnerKind::H1, dmu[k], dmu[k]) + w_norm2(drho[k]));
    int_strong += tau * (inner_product(grid, InnerKind::L2, mu_t, mu_t) + w_norm2(rho_t));
    if (denom > 0.0) {
      rep.ratio = std::max(rep.ratio, (max_weak + int_weak) / denom);
      rep.ratio_strong = std::max(rep.ratio_strong, (max_strong + int_strong) / denom);
    }
  }
  rep.degenerate = !(denom > 0.0);
  return rep;
}

namespace {

bool spatially_uniform(const Field& v) { return v.size() == 0 || v.maxCoeff() - v.minCoeff() == 0.0; }

}  // namespace

OracleReport ode_oracle_check(const ProblemData& data, const Trajectory& u, const Grid& grid, const TimeGrid& tgrid,
                              const Potential& pot, const SolverConfig& cfg) {
  if (!spatially_uniform(data.rho0) || !spatially_uniform(data.mu0)) {
    throw InvalidArgument("ode_oracle_check: rho0 and mu0 must be spatially uniform");
  }
  for (const auto& level : u) {
    if (!spatially_uniform(level)) throw InvalidArgument("ode_oracle_check: control must be spatially uniform");
  }
  const auto sol = solve_state(data, u, grid, tgrid, pot, cfg);

  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 2>;
  const double eps = data.epsilon;
  const double delta = data.delta;
  auto control_at = [&](double t) {
    const double s = std::clamp(t / tgrid.tau(), 0.0, static_cast<double>(tgrid.steps()));
    const int k = std::min(static_cast<int>(s), tgrid.steps() - 1);
    const double frac = s - k;
    return (1.0 - frac) * u[k][0] + frac * u[k + 1][0];
  };
  auto rhs = [&](const State& x, State& dx, double t) {
    const double rho_t = (x[1] - potential_eval(pot, x[0], 1)) / delta;
    dx[0] = rho_t;
    dx[1] = (control_at(t) - x[1] * rho_t) / (eps + 2.0 * x[0]);
  };

  std::vector<double> times;
  for (int k = 0; k < tgrid.levels(); ++k) times.push_back(tgrid.time(k));
  State x{data.rho0[0], data.mu0[0]};
  OracleReport rep;
  int level = 0;
  auto observe = [&](const State& s, double) {
    const double er = (sol.state.rho[level].array() - s[0]).abs().maxCoeff();
    const double em = (sol.state.mu[level].array() - s[1]).abs().maxCoeff();
    rep.rho_error = std::max(rep.rho_error, er);
    rep.mu_error = std::max(rep.mu_error, em);
    ++level;
  };
  odeint::integrate_times(odeint::make_controlled(1e-10, 1e-10, odeint::runge_kutta_dopri5<State>()), rhs, x,
                          times.begin(), times.end(), tgrid.tau() / 16.0, observe);
  rep.max_error = std::max(rep.rho_error, rep.mu_error);
  return rep;
}

BoundsReport bounds_check(const StateTrajectory& state, const Diagnostics& diag) {
  BoundsReport rep;
  rep.rho_lower = state.rho.min();
  rep.rho_upper = state.rho.max();
  rep.mu_lower = state.mu.min();
  rep.mu_upper = state.mu.max();
  for (int k = 0; k < state.rho.levels() && !rep.violation; ++k) {
    for (int c = 0; c < state.rho.cells(); ++c) {
      const double r = state.rho[k][c];
      const double m = state.mu[k][c];
      if (!(r > 0.0 && r < 1.0)) {
        rep.violation = BoundViolation{"rho", k, c, r};
        break;
      }
      if (!(m >= -diag.bound_tol)) {
        rep.violation = BoundViolation{"mu", k, c, m};
        break;
      }
    }
  }
  rep.pass = !rep.violation.has_value();
  return rep;
}

Trajectory random_control(const Grid& grid, const TimeGrid& tgrid, const Trajectory& lo, const Trajectory& hi,
                          std::uint64_t seed) {
  require_on_grids(grid, tgrid, lo, "random_control lower bound");
  require_on_grids(grid, tgrid, hi, "random_control upper bound");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double scale = 0.0;
  for (int a = 0; a < grid.dim(); ++a) scale = std::max(scale, grid.length(a));
  const double c = 0.01 * scale * scale;
  ShiftedLaplacianSolver smoother(grid);

  Trajectory out(tgrid.levels(), grid.cells());
  for (int k = 0; k < tgrid.levels(); ++k) {
    Field raw(grid.cells());
    for (int i = 0; i < grid.cells(); ++i) raw[i] = lo[k][i] + unit(rng) * (hi[k][i] - lo[k][i]);
    // (I - c L) v = raw, written as (1/c - L) v = raw / c.
    const Field smooth = smoother.solve(1.0 / c, raw / c);
    out[k] = smooth.cwiseMax(lo[k]).cwiseMin(hi[k]);
  }
  return out;
}

Trajectory random_control(const Grid& grid, const TimeGrid& tgrid, double lo, double hi, std::uint64_t seed) {
  return random_control(grid, tgrid, Trajectory(tgrid.levels(), grid.cells(), lo),
                        Trajectory(tgrid.levels(), grid.cells(), hi), seed);
}

Field prolong_field(const Grid& coarse, const Grid& fine, const Field& v) {
  require_on_grid(coarse, v, "prolong_field");
  const bool two = fine.dim() == 2;
  if (fine.dim() != coarse.dim() || fine.n(0) != 2 * coarse.n(0) || (two && fine.n(1) != 2 * coarse.n(1))) {
    throw InvalidArgument("prolong_field: fine grid must halve every axis of the coarse grid");
  }
  Field out(fine.cells());
  const int ny = two ? fine.n(1) : 1;
  for (int i = 0; i < fine.n(0); ++i) {
    for (int j = 0; j < ny; ++j) out[fine.index(i, j)] = v[coarse.index(i / 2, two ? j / 2 : 0)];
  }
  return out;
}

Trajectory prolong_trajectory(const Grid& coarse, const Grid& fine, const Trajectory& v) {
  if (v.levels() < 1) throw InvalidArgument("prolong_trajectory: empty trajectory");
  Trajectory out(2 * (v.levels() - 1) + 1, fine.cells());
  for (int k = 0; k < v.levels(); ++k) out[2 * k] = prolong_field(coarse, fine, v[k]);
  for (int k = 0; k + 1 < v.levels(); ++k) out[2 * k + 1] = 0.5 * (out[2 * k] + out[2 * k + 2]);
  return out;
}

RefinedProblem refine_problem(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid) {
  std::vector<int> n;
  std::vector<double> length;
  for (int a = 0; a < grid.dim(); ++a) {
    n.push_back(2 * grid.n(a));
    length.push_back(grid.length(a));
  }
  RefinedProblem r{make_grid(grid.dim(), n, length), TimeGrid(tgrid.final_time(), 2 * tgrid.steps()), data};
  r.data.rho0 = prolong_field(grid, r.grid, data.rho0);
  r.data.mu0 = prolong_field(grid, r.grid, data.mu0);
  r.data.rho_T = prolong_field(grid, r.grid, data.rho_T);
  r.data.mu_T = prolong_trajectory(grid, r.grid, data.mu_T);
  r.data.U_bound = prolong_trajectory(grid, r.grid, data.U_bound);
  return r;
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json CheckReport::to_json() const {
  return {{"name", name}, {"pass", pass}, {"metrics", metrics}, {"seed", seed}, {"config_hash", config_hash}};
}

}  // namespace phaseopt
