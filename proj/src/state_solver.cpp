#include "phaseopt/state_solver.hpp"

#include "phaseopt/errors.hpp"
#include "phaseopt/linear_solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace phaseopt {

void SolverConfig::validate() const {
  if (!(newton_tol > 0.0)) throw InvalidArgument("solver.newton_tol must be positive");
  if (newton_max < 1) throw InvalidArgument("solver.newton_max must be at least 1");
  if (!(boundary_margin > 0.0 && boundary_margin < 1.0)) throw InvalidArgument("solver.boundary_margin must lie in (0,1)");
  if (coupling_iters < 1) throw InvalidArgument("solver.coupling_iters must be at least 1");
  if (!(linear_tol > 0.0)) throw InvalidArgument("solver.linear_tol must be positive");
  if (!(bound_tol > 0.0)) throw InvalidArgument("solver.bound_tol must be positive");
}

void ProblemData::validate(const Grid& grid, const TimeGrid& tgrid) const {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  if (!(beta1 >= 0.0) || !(beta2 >= 0.0)) throw InvalidArgument("beta1 and beta2 must be nonnegative");
  require_on_grid(grid, rho0, "rho0");
  require_on_grid(grid, mu0, "mu0");
  require_on_grid(grid, rho_T, "rho_T");
  require_on_grids(grid, tgrid, mu_T, "mu_T");
  require_on_grids(grid, tgrid, U_bound, "U_bound");
  if (!(rho0.minCoeff() > 0.0)) throw InvalidArgument("rho0 violates inf rho0 > 0");
  if (!(rho0.maxCoeff() < 1.0)) throw InvalidArgument("rho0 violates sup rho0 < 1");
  if (!(mu0.minCoeff() >= 0.0)) throw InvalidArgument("mu0 violates mu0 >= 0");
  if (!(U_bound.min() >= 0.0)) throw InvalidArgument("control bound violates U >= 0");
}

void require_feasible(const Trajectory& u, const Trajectory& U_bound, double tol, const char* what) {
  require_same_shape(u, U_bound, what);
  for (int k = 0; k < u.levels(); ++k) {
    for (int c = 0; c < u.cells(); ++c) {
      const double v = u[k][c];
      if (!(v >= -tol && v <= U_bound[k][c] + tol)) {
        throw InfeasibleControl(std::string(what) + ": control value " + format_number(v) + " at level " +
                                std::to_string(k) + ", cell " + std::to_string(c) + " lies outside [0, " +
                                format_number(U_bound[k][c]) + "]");
      }
    }
  }
}

namespace {

Field rho_residual(const Grid& grid, const Field& r, const Field& rho_n, const Field& mu_rhs, const Potential& pot,
                   double delta, double tau) {
  Field res = delta * (r - rho_n) / tau - grid.laplacian() * r - mu_rhs;
  for (int i = 0; i < r.size(); ++i) res[i] += potential_eval(pot, r[i], 1);
  return res;
}

}  // namespace

RhoStepResult step_rho(const Grid& grid, const Field& rho_n, const Field& mu_rhs, const Potential& pot, double delta,
                       double tau, const SolverConfig& cfg, const std::optional<Field>& guess) {
  require_on_grid(grid, rho_n, "step_rho");
  require_on_grid(grid, mu_rhs, "step_rho");
  ShiftedLaplacianSolver solver(grid, cfg.linear_tol);
  const double theta = cfg.boundary_margin;

  RhoStepResult out;
  Field r = guess ? *guess : rho_n;
  Field shift(r.size());
  for (int it = 0;; ++it) {
    const Field res = rho_residual(grid, r, rho_n, mu_rhs, pot, delta, tau);
    const double res_norm = norm(grid, InnerKind::L2, res);
    out.residuals.push_back(res_norm);
    if (res_norm <= cfg.newton_tol) {
      out.iterations = it;
      out.rho = std::move(r);
      return out;
    }
    if (it >= cfg.newton_max || !std::isfinite(res_norm)) {
      throw NewtonDivergence("rho-step Newton did not reach tolerance " + format_number(cfg.newton_tol) + " in " +
                             std::to_string(cfg.newton_max) + " iterations (residual " + format_number(res_norm) + ")");
    }
    for (int i = 0; i < r.size(); ++i) shift[i] = delta / tau + potential_eval(pot, r[i], 2);
    const Field d = solver.solve(shift, -res);

    // Largest step keeping every iterate at least theta * (distance) away from 0 and 1.
    double lambda = 1.0;
    for (int i = 0; i < r.size(); ++i) {
      if (d[i] < 0.0) lambda = std::min(lambda, (1.0 - theta) * r[i] / -d[i]);
      if (d[i] > 0.0) lambda = std::min(lambda, (1.0 - theta) * (1.0 - r[i]) / d[i]);
    }
    r += lambda * d;
    // The damped step stays interior in exact arithmetic; rounding can still land on 0 or 1.
    if (!(r.minCoeff() > 0.0 && r.maxCoeff() < 1.0)) {
      throw NewtonDivergence("rho-step Newton iterate reached the boundary of (0,1) in floating point");
    }
  }
}

MuStepResult step_mu(const Grid& grid, const Field& rho_n, const Field& rho_np1, const Field& mu_n, const Field& u_np1,
                     double epsilon, double tau, const SolverConfig& cfg) {
  require_on_grid(grid, rho_n, "step_mu");
  require_on_grid(grid, rho_np1, "step_mu");
  require_on_grid(grid, mu_n, "step_mu");
  require_on_grid(grid, u_np1, "step_mu");
  if (!(epsilon > 0.0)) throw InvalidArgument("step_mu: epsilon must be positive");

  const Field memory = epsilon + 2.0 * rho_np1.array();
  const Field coefficient = memory + (rho_np1 - rho_n);
  MuStepResult out;
  out.min_coefficient = coefficient.minCoeff();
  out.m_matrix = out.min_coefficient > 0.0;
  if (!out.m_matrix) {
    throw NonpositiveCoefficient("mu-step diagonal coefficient eps + 3 rho^{n+1} - rho^n reached " +
                                 format_number(out.min_coefficient) + " (reduce the time step)");
  }
  ShiftedLaplacianSolver solver(grid, cfg.linear_tol);
  const Field rhs = u_np1 + memory.cwiseProduct(mu_n) / tau;
  out.mu = solver.solve(coefficient / tau, rhs);
  return out;
}

StateSolution solve_state(const ProblemData& data, const Trajectory& u, const Grid& grid, const TimeGrid& tgrid,
                          const Potential& pot, const SolverConfig& cfg) {
  cfg.validate();
  data.validate(grid, tgrid);
  require_on_grids(grid, tgrid, u, "solve_state control");
  require_feasible(u, data.U_bound, cfg.bound_tol, "solve_state");

  const int steps = tgrid.steps();
  const double tau = tgrid.tau();
  const int sweeps = cfg.coupling_iters;

  StateSolution sol;
  auto& st = sol.state;
  auto& diag = sol.diagnostics;
  st.rho = Trajectory(tgrid.levels(), grid.cells());
  st.mu = Trajectory(tgrid.levels(), grid.cells());
  st.rho[0] = data.rho0;
  st.mu[0] = data.mu0;
  if (sweeps > 1) st.sweeps.resize(static_cast<std::size_t>(steps));
  diag.newton_iters.assign(static_cast<std::size_t>(steps), 0);
  diag.newton_residuals.resize(static_cast<std::size_t>(steps));
  diag.bound_tol = cfg.bound_tol;
  diag.min_mu_coefficient = std::numeric_limits<double>::infinity();

  for (int n = 0; n < steps; ++n) {
    try {
      Field mu_rhs = st.mu[n];
      Field r = st.rho[n];
      Field m;
      for (int s = 0; s < sweeps; ++s) {
        auto rs = step_rho(grid, st.rho[n], mu_rhs, pot, data.delta, tau, cfg, r);
        r = std::move(rs.rho);
        diag.newton_iters[static_cast<std::size_t>(n)] += rs.iterations;
        auto& hist = diag.newton_residuals[static_cast<std::size_t>(n)];
        hist.insert(hist.end(), rs.residuals.begin(), rs.residuals.end());

        auto ms = step_mu(grid, st.rho[n], r, st.mu[n], u[n + 1], data.epsilon, tau, cfg);
        diag.min_mu_coefficient = std::min(diag.min_mu_coefficient, ms.min_coefficient);
        m = std::move(ms.mu);
        if (sweeps > 1) {
          st.sweeps[static_cast<std::size_t>(n)].rho.push_back(r);
          st.sweeps[static_cast<std::size_t>(n)].mu.push_back(m);
        }
        mu_rhs = m;
      }
      st.rho[n + 1] = std::move(r);
      st.mu[n + 1] = std::move(m);
    } catch (SolverError& e) {
      e.set_step(n + 1);
      throw;
    }
  }

  diag.rho_min = st.rho.min();
  diag.rho_max = st.rho.max();
  diag.mu_min = st.mu.min();
  diag.mu_max = st.mu.max();
  diag.rho_interior = diag.rho_min > 0.0 && diag.rho_max < 1.0;
  diag.mu_nonnegative = diag.mu_min >= -cfg.bound_tol;
  diag.m_matrix = diag.min_mu_coefficient > 0.0;
  return sol;
}

StepResiduals residual_norms(const StateTrajectory& state, const Trajectory& u, const ProblemData& data,
                             const Grid& grid, const TimeGrid& tgrid, const Potential& pot) {
  require_on_grids(grid, tgrid, state.rho, "residual_norms rho");
  require_on_grids(grid, tgrid, state.mu, "residual_norms mu");
  require_on_grids(grid, tgrid, u, "residual_norms control");
  const double tau = tgrid.tau();
  StepResiduals out;
  for (int n = 0; n < tgrid.steps(); ++n) {
    // With extra coupling sweeps the accepted rho solves against the previous sweep's mu.
    const auto& sweep = state.sweeps.empty() ? nullptr : &state.sweeps[static_cast<std::size_t>(n)];
    const Field& mu_rhs = (sweep && sweep->mu.size() > 1) ? sweep->mu[sweep->mu.size() - 2] : state.mu[n];
    const Field& r_old = state.rho[n];
    const Field& r_new = state.rho[n + 1];
    out.rho.push_back(norm(grid, InnerKind::L2, rho_residual(grid, r_new, r_old, mu_rhs, pot, data.delta, tau)));

    const Field memory = data.epsilon + 2.0 * r_new.array();
    const Field coefficient = memory + (r_new - r_old);
    const Field res = coefficient.cwiseProduct(state.mu[n + 1]) / tau - grid.laplacian() * state.mu[n + 1] -
                      u[n + 1] - memory.cwiseProduct(state.mu[n]) / tau;
    out.mu.push_back(norm(grid, InnerKind::L2, res));
  }
  return out;
}

}  // namespace phaseopt
