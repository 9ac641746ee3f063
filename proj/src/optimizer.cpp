#include "phaseopt/optimizer.hpp"

#include "phaseopt/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace phaseopt {

void OptimizerConfig::validate() const {
  if (max_iters < 0) throw InvalidArgument("optimizer.max_iters must be nonnegative");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw InvalidArgument("optimizer.armijo_c must lie in (0,1)");
  if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) throw InvalidArgument("optimizer.armijo_shrink must lie in (0,1)");
  if (!(step0 > 0.0)) throw InvalidArgument("optimizer.step0 must be positive");
  if (!(stat_tol > 0.0)) throw InvalidArgument("optimizer.stat_tol must be positive");
  if (!(min_step > 0.0)) throw InvalidArgument("optimizer.min_step must be positive");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Stationary:
      return "Stationary";
    case Termination::MaxIters:
      return "MaxIters";
    case Termination::Stalled:
      return "Stalled";
  }
  return "Unknown";
}

double tracking_cost(const StateTrajectory& state, const ProblemData& data, const Grid& grid, const TimeGrid& tgrid) {
  require_on_grids(grid, tgrid, state.rho, "cost rho");
  require_on_grids(grid, tgrid, state.mu, "cost mu");
  require_on_grids(grid, tgrid, data.mu_T, "cost mu_T");
  const Field terminal = state.rho[tgrid.steps()] - data.rho_T;
  double j = 0.5 * inner_product(grid, InnerKind::L2, terminal, terminal);
  if (data.beta1 != 0.0) {
    const Trajectory misfit = state.mu - data.mu_T;
    j += 0.5 * data.beta1 * inner_product(grid, tgrid, misfit, misfit, kTrackingRule);
  }
  return j;
}

double cost(const StateTrajectory& state, const Trajectory& u, const ProblemData& data, const Grid& grid,
            const TimeGrid& tgrid) {
  require_on_grids(grid, tgrid, u, "cost control");
  double j = tracking_cost(state, data, grid, tgrid);
  if (data.beta2 != 0.0) j += 0.5 * data.beta2 * inner_product(grid, tgrid, u, u, kControlRule);
  return j;
}

Trajectory reduced_gradient(const Trajectory& u, const Trajectory& q, double beta2) {
  require_same_shape(u, q, "reduced_gradient");
  return beta2 * u + q;
}

Trajectory project_control(const Trajectory& u, const Trajectory& U_bound) {
  require_same_shape(u, U_bound, "project_control");
  Trajectory out = u;
  for (int k = 0; k < u.levels(); ++k) {
    if (!(U_bound[k].minCoeff() >= 0.0)) throw InvalidArgument("project_control: control bound must be nonnegative");
    out[k] = u[k].cwiseMax(0.0).cwiseMin(U_bound[k]);
  }
  return out;
}

double directional_derivative(const StateTrajectory& state, const TangentTrajectory& tangent, const Trajectory& u,
                              const Trajectory& h, const ProblemData& data, const Grid& grid, const TimeGrid& tgrid) {
  require_on_grids(grid, tgrid, u, "directional_derivative u");
  require_on_grids(grid, tgrid, h, "directional_derivative h");
  require_on_grids(grid, tgrid, tangent.xi, "directional_derivative xi");
  require_on_grids(grid, tgrid, tangent.eta, "directional_derivative eta");
  const int steps = tgrid.steps();
  return data.beta2 * inner_product(grid, tgrid, u, h, kControlRule) +
         inner_product(grid, InnerKind::L2, state.rho[steps] - data.rho_T, tangent.xi[steps]) +
         data.beta1 * inner_product(grid, tgrid, state.mu - data.mu_T, tangent.eta, kTrackingRule);
}

double kkt_residual(const Grid& grid, const TimeGrid& tgrid, const Trajectory& u, const Trajectory& g,
                    const Trajectory& U_bound) {
  require_on_grids(grid, tgrid, u, "kkt_residual u");
  require_same_shape(u, g, "kkt_residual");
  require_same_shape(u, U_bound, "kkt_residual");
  Trajectory violation(u.levels(), u.cells());
  for (int k = 0; k < u.levels(); ++k) {
    for (int c = 0; c < u.cells(); ++c) {
      const double v = u[k][c];
      const double hi = U_bound[k][c];
      if (!(v >= 0.0 && v <= hi)) {
        throw InfeasibleControl("kkt_residual: control value " + format_number(v) + " outside [0, " +
                                format_number(hi) + "] at level " + std::to_string(k));
      }
      const double gk = g[k][c];
      double r = 0.0;
      if (v <= 0.0 && v >= hi) {
        r = 0.0;  // U = 0: the feasible set is a point
      } else if (v <= 0.0) {
        r = std::max(0.0, -gk);
      } else if (v >= hi) {
        r = std::max(0.0, gk);
      } else {
        r = std::abs(gk);
      }
      violation[k][c] = r;
    }
  }
  return norm(grid, tgrid, violation, kControlRule);
}

namespace {

struct Evaluation {
  StateSolution solution;
  double J = 0.0;
};

Evaluation evaluate(const ProblemData& data, const Trajectory& u, const Grid& grid, const TimeGrid& tgrid,
                    const Potential& pot, const SolverConfig& cfg) {
  Evaluation e{solve_state(data, u, grid, tgrid, pot, cfg), 0.0};
  e.J = cost(e.solution.state, u, data, grid, tgrid);
  return e;
}

}  // namespace

OptimizeResult projected_gradient_descent(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid,
                                          const Potential& pot, const SolverConfig& solver_cfg,
                                          const OptimizerConfig& opt_cfg, const Trajectory& u_init,
                                          const IterateCallback& on_iterate) {
  opt_cfg.validate();
  solver_cfg.validate();
  data.validate(grid, tgrid);
  require_on_grids(grid, tgrid, u_init, "projected_gradient_descent u_init");

  using clock = std::chrono::steady_clock;
  OptimizeResult res;
  int iterate = 0;
  try {
    auto t0 = clock::now();
    Trajectory u = project_control(u_init, data.U_bound);
    Evaluation cur = evaluate(data, u, grid, tgrid, pot, solver_cfg);
    AdjointTrajectory adj = solve_adjoint(cur.solution.state, data, grid, tgrid, pot, solver_cfg, opt_cfg.adjoint_mode);
    Trajectory g = reduced_gradient(u, adj.q, data.beta2);
    res.J_history.push_back(cur.J);
    res.iteration_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    if (on_iterate) on_iterate(0, u);

    double trial = opt_cfg.step0;
    for (;; ++iterate) {
      const double kkt = kkt_residual(grid, tgrid, u, g, data.U_bound);
      res.kkt_history.push_back(kkt);
      if (kkt <= opt_cfg.stat_tol) {
        res.termination = Termination::Stationary;
        break;
      }
      if (iterate >= opt_cfg.max_iters) {
        res.termination = Termination::MaxIters;
        break;
      }

      t0 = clock::now();
      bool accepted = false;
      Trajectory cand;
      Evaluation next;
      while (trial >= opt_cfg.min_step) {
        cand = project_control(u - trial * g, data.U_bound);
        const Trajectory d = u - cand;
        const double d2 = inner_product(grid, tgrid, d, d, kControlRule);
        if (d2 == 0.0) break;
        next = evaluate(data, cand, grid, tgrid, pot, solver_cfg);
        if (next.J <= cur.J - opt_cfg.armijo_c * d2 / trial) {
          accepted = true;
          break;
        }
        trial *= opt_cfg.armijo_shrink;
      }
      if (!accepted) {
        res.termination = Termination::Stalled;
        break;
      }

      AdjointTrajectory adj_next =
          solve_adjoint(next.solution.state, data, grid, tgrid, pot, solver_cfg, opt_cfg.adjoint_mode);
      Trajectory g_next = reduced_gradient(cand, adj_next.q, data.beta2);
      res.step_history.push_back(trial);

      // Short Barzilai-Borwein quotient <s,y>/<y,y> as the next trial step.
      const Trajectory s = cand - u;
      const Trajectory y = g_next - g;
      const double sy = inner_product(grid, tgrid, s, y, kControlRule);
      const double yy = inner_product(grid, tgrid, y, y, kControlRule);
      trial = sy > 0.0 && yy > 0.0 ? std::clamp(sy / yy, opt_cfg.min_step, 1e12) : std::max(opt_cfg.step0, 2.0 * trial);

      u = std::move(cand);
      cur = std::move(next);
      adj = std::move(adj_next);
      g = std::move(g_next);
      res.J_history.push_back(cur.J);
      res.iteration_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
      if (on_iterate) on_iterate(iterate + 1, u);
    }

    res.iterations = iterate;
    res.u_opt = std::move(u);
    res.state = std::move(cur.solution.state);
    res.diagnostics = std::move(cur.solution.diagnostics);
    res.adjoint = std::move(adj);
  } catch (SolverError& e) {
    e.set_iterate(iterate);
    throw;
  }
  return res;
}

}  // namespace phaseopt
