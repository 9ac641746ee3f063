#include "phaseopt/sensitivity.hpp"

#include "phaseopt/errors.hpp"
#include "phaseopt/linear_solve.hpp"

namespace phaseopt {

namespace {

/// Sweep iterates (r_s, m_s) of step n -> n+1; the last sweep is the accepted level.
struct SweepView {
  const StateTrajectory& state;
  int sweeps;

  int count() const { return sweeps; }
  const Field& rho(int n, int s) const {
    return sweeps == 1 ? state.rho[n + 1] : state.sweeps[static_cast<std::size_t>(n)].rho[static_cast<std::size_t>(s)];
  }
  const Field& mu(int n, int s) const {
    return sweeps == 1 ? state.mu[n + 1] : state.sweeps[static_cast<std::size_t>(n)].mu[static_cast<std::size_t>(s)];
  }
};

SweepView sweep_view(const StateTrajectory& state, const Grid& grid, const TimeGrid& tgrid) {
  require_on_grids(grid, tgrid, state.rho, "state rho");
  require_on_grids(grid, tgrid, state.mu, "state mu");
  if (state.sweeps.empty()) return {state, 1};
  if (static_cast<int>(state.sweeps.size()) != tgrid.steps()) throw ShapeMismatch("state sweep records do not match N");
  const int k = static_cast<int>(state.sweeps.front().rho.size());
  return {state, k};
}

Field curvature_shift(const Field& r, const Potential& pot, double delta, double tau) {
  Field shift(r.size());
  for (int i = 0; i < r.size(); ++i) shift[i] = delta / tau + potential_eval(pot, r[i], 2);
  return shift;
}

}  // namespace

TangentTrajectory solve_tangent(const StateTrajectory& state, const Trajectory& h, const ProblemData& data,
                                const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
                                const SolverConfig& cfg) {
  const auto sv = sweep_view(state, grid, tgrid);
  require_on_grids(grid, tgrid, h, "solve_tangent direction");
  const double tau = tgrid.tau();
  const double eps = data.epsilon;
  const double delta = data.delta;
  ShiftedLaplacianSolver solver(grid, cfg.linear_tol);

  TangentTrajectory t{Trajectory(tgrid.levels(), grid.cells()), Trajectory(tgrid.levels(), grid.cells())};
  for (int n = 0; n < tgrid.steps(); ++n) {
    try {
      const Field& rho_n = state.rho[n];
      const Field& mu_n = state.mu[n];
      const Field& xi_n = t.xi[n];
      const Field& eta_n = t.eta[n];
      Field dm = eta_n;
      Field xs;
      for (int s = 0; s < sv.count(); ++s) {
        const Field& r = sv.rho(n, s);
        const Field& m = sv.mu(n, s);
        xs = solver.solve(curvature_shift(r, pot, delta, tau), delta * xi_n / tau + dm);
        const Field memory = eps + 2.0 * r.array();
        const Field coefficient = memory + (r - rho_n);
        const Field rhs = h[n + 1] + memory.cwiseProduct(eta_n) / tau + 2.0 * mu_n.cwiseProduct(xs) / tau -
                          (3.0 * xs - xi_n).cwiseProduct(m) / tau;
        dm = solver.solve(coefficient / tau, rhs);
      }
      t.xi[n + 1] = std::move(xs);
      t.eta[n + 1] = std::move(dm);
    } catch (SolverError& e) {
      e.set_step(n + 1);
      throw;
    }
  }
  return t;
}

namespace {

AdjointTrajectory adjoint_discrete(const StateTrajectory& state, const SweepView& sv, const ProblemData& data,
                                   const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
                                   ShiftedLaplacianSolver& solver) {
  const int steps = tgrid.steps();
  const double tau = tgrid.tau();
  const double w = grid.weight();
  const double eps = data.epsilon;
  const double delta = data.delta;
  const auto w_track = time_weights(tgrid, kTrackingRule);
  const auto w_ctrl = time_weights(tgrid, kControlRule);

  AdjointTrajectory adj{Trajectory(tgrid.levels(), grid.cells()), Trajectory(tgrid.levels(), grid.cells())};
  Trajectory u_bar(tgrid.levels(), grid.cells());

  // Cotangents (Euclidean, per cell value) of the discrete cost w.r.t. rho^n and mu^n.
  Field rho_bar = w * (state.rho[steps] - data.rho_T);
  Field mu_bar = data.beta1 * w * w_track[static_cast<std::size_t>(steps)] * (state.mu[steps] - data.mu_T[steps]);
  adj.p[steps] = (state.rho[steps] - data.rho_T) / delta;

  const int sweeps = sv.count();
  std::vector<Field> r_bar(static_cast<std::size_t>(sweeps));
  for (int n = steps - 1; n >= 0; --n) {
    try {
      const Field& rho_n = state.rho[n];
      const Field& mu_n = state.mu[n];
      Field rho_n_bar = Field::Zero(grid.cells());
      Field mu_n_bar = Field::Zero(grid.cells());
      for (auto& rb : r_bar) rb = Field::Zero(grid.cells());
      r_bar.back() = rho_bar;
      Field m_bar = mu_bar;

      for (int s = sweeps - 1; s >= 0; --s) {
        const Field& r = sv.rho(n, s);
        const Field& m = sv.mu(n, s);
        const Field memory = eps + 2.0 * r.array();
        const Field coefficient = memory + (r - rho_n);

        // Reverse of the mu-step: (coefficient/tau - L) m = u + memory * mu_n / tau.
        const Field y = solver.solve(coefficient / tau, m_bar);
        u_bar[n + 1] += y;
        mu_n_bar += memory.cwiseProduct(y) / tau;
        r_bar[static_cast<std::size_t>(s)] += (2.0 * mu_n - 3.0 * m).cwiseProduct(y) / tau;
        rho_n_bar += m.cwiseProduct(y) / tau;

        // Reverse of the rho Newton solve through its converged Jacobian.
        const Field z = solver.solve(curvature_shift(r, pot, delta, tau), r_bar[static_cast<std::size_t>(s)]);
        rho_n_bar += delta * z / tau;
        if (s == sweeps - 1) adj.p[n] = z / (tau * w);
        if (s > 0) {
          m_bar = z;
        } else {
          mu_n_bar += z;
        }
      }
      rho_bar = std::move(rho_n_bar);
      mu_bar = mu_n_bar + data.beta1 * w * w_track[static_cast<std::size_t>(n)] * (mu_n - data.mu_T[n]);
    } catch (SolverError& e) {
      e.set_step(n + 1);
      throw;
    }
  }

  for (int k = 0; k < tgrid.levels(); ++k) {
    const double wk = w_ctrl[static_cast<std::size_t>(k)];
    if (wk > 0.0) adj.q[k] = u_bar[k] / (wk * w);
  }
  // Level 0 carries no quadrature weight; continue the same recursion one level
  // (rho^{-1} := rho^0) so q^0 is comparable with the continuous adjoint.
  const Field memory0 = eps + 2.0 * state.rho[0].array();
  adj.q[0] = solver.solve(memory0 / tau, mu_bar) / (tau * w);
  return adj;
}

AdjointTrajectory adjoint_pde(const StateTrajectory& state, const ProblemData& data, const Grid& grid,
                              const TimeGrid& tgrid, const Potential& pot, ShiftedLaplacianSolver& solver) {
  const int steps = tgrid.steps();
  const double tau = tgrid.tau();
  const double eps = data.epsilon;
  const double delta = data.delta;

  AdjointTrajectory adj{Trajectory(tgrid.levels(), grid.cells()), Trajectory(tgrid.levels(), grid.cells())};
  adj.p[steps] = (state.rho[steps] - data.rho_T) / delta;

  for (int n = steps - 1; n >= 0; --n) {
    try {
      const Field& rho_n = state.rho[n];
      const Field& mu_n = state.mu[n];
      const Field rho_t = (state.rho[n + 1] - rho_n) / tau;
      const Field mu_t = (state.mu[n + 1] - mu_n) / tau;
      const Field& q_next = adj.q[n + 1];
      const Field& p_next = adj.p[n + 1];

      // -(eps+2rho) (q_{n+1}-q_n)/tau - L q_n + q_n = (1 + rho_t) q_{n+1} + p_{n+1} + beta1 (mu - mu_T)
      const Field memory = eps + 2.0 * rho_n.array();
      const Field rhs_q = memory.cwiseProduct(q_next) / tau + (1.0 + rho_t.array()).matrix().cwiseProduct(q_next) +
                          p_next + data.beta1 * (mu_n - data.mu_T[n]);
      adj.q[n] = solver.solve((memory.array() / tau + 1.0).matrix(), rhs_q);

      // -delta (p_{n+1}-p_n)/tau - L p_n + f''(rho) p_n = mu (q_{n+1}-q_n)/tau - mu_t q_n
      const Field rhs_p = delta * p_next / tau + mu_n.cwiseProduct(q_next - adj.q[n]) / tau - mu_t.cwiseProduct(adj.q[n]);
      adj.p[n] = solver.solve(curvature_shift(rho_n, pot, delta, tau), rhs_p);
    } catch (SolverError& e) {
      e.set_step(n);
      throw;
    }
  }
  return adj;
}

}  // namespace

AdjointTrajectory solve_adjoint(const StateTrajectory& state, const ProblemData& data, const Grid& grid,
                                const TimeGrid& tgrid, const Potential& pot, const SolverConfig& cfg,
                                AdjointMode mode) {
  const auto sv = sweep_view(state, grid, tgrid);
  require_on_grid(grid, data.rho_T, "rho_T");
  require_on_grids(grid, tgrid, data.mu_T, "mu_T");
  ShiftedLaplacianSolver solver(grid, cfg.linear_tol);
  if (mode == AdjointMode::Discrete) return adjoint_discrete(state, sv, data, grid, tgrid, pot, solver);
  return adjoint_pde(state, data, grid, tgrid, pot, solver);
}

DualityPair duality_pairing(const StateTrajectory& state, const TangentTrajectory& tangent,
                            const AdjointTrajectory& adjoint, const Trajectory& h, const ProblemData& data,
                            const Grid& grid, const TimeGrid& tgrid) {
  require_on_grids(grid, tgrid, tangent.xi, "duality_pairing xi");
  require_on_grids(grid, tgrid, tangent.eta, "duality_pairing eta");
  require_on_grids(grid, tgrid, adjoint.q, "duality_pairing q");
  require_on_grids(grid, tgrid, h, "duality_pairing h");
  const int steps = tgrid.steps();
  DualityPair d;
  d.lhs = inner_product(grid, InnerKind::L2, state.rho[steps] - data.rho_T, tangent.xi[steps]) +
          data.beta1 * inner_product(grid, tgrid, state.mu - data.mu_T, tangent.eta, kTrackingRule);
  d.rhs = inner_product(grid, tgrid, adjoint.q, h, kControlRule);
  return d;
}

}  // namespace phaseopt
