#pragma once

#include "phaseopt/grid.hpp"
#include "phaseopt/potential.hpp"
#include "phaseopt/sensitivity.hpp"
#include "phaseopt/state_solver.hpp"

#include <functional>
#include <string>
#include <vector>

namespace phaseopt {

struct OptimizerConfig {
  int max_iters = 200;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double step0 = 1.0;
  double stat_tol = 1e-6;
  double min_step = 1e-12;
  AdjointMode adjoint_mode = AdjointMode::Discrete;

  void validate() const;
};

enum class Termination { Stationary, MaxIters, Stalled };

std::string to_string(Termination t);

struct OptimizeResult {
  Trajectory u_opt;
  StateTrajectory state;
  Diagnostics diagnostics;
  AdjointTrajectory adjoint;
  std::vector<double> J_history;
  std::vector<double> kkt_history;
  std::vector<double> step_history;
  std::vector<double> iteration_seconds;
  Termination termination = Termination::MaxIters;
  int iterations = 0;
};

/// J = 1/2 |rho(T) - rho_T|^2 + beta1/2 |mu - mu_T|_Q^2 + beta2/2 |u|_Q^2.
double cost(const StateTrajectory& state, const Trajectory& u, const ProblemData& data, const Grid& grid,
            const TimeGrid& tgrid);

/// The first two terms of the cost only.
double tracking_cost(const StateTrajectory& state, const ProblemData& data, const Grid& grid, const TimeGrid& tgrid);

/// g = beta2 u + q pointwise.
Trajectory reduced_gradient(const Trajectory& u, const Trajectory& q, double beta2);

/// Pointwise min(U, max(0, u)).
Trajectory project_control(const Trajectory& u, const Trajectory& U_bound);

/// beta2 <u,h>_Q + <rho(T) - rho_T, xi(T)>_H + beta1 <mu - mu_T, eta>_Q.
double directional_derivative(const StateTrajectory& state, const TangentTrajectory& tangent, const Trajectory& u,
                              const Trajectory& h, const ProblemData& data, const Grid& grid, const TimeGrid& tgrid);

/**
 * Norm over Q of the pointwise violation of the variational inequality:
 * |g| where 0 < u < U, max(0, -g) where u = 0, max(0, g) where u = U.
 * Zero iff u solves the discrete variational inequality; with beta2 = 0 this
 * is the bang-bang rule (u = 0 where q > 0, u = U where q < 0).
 * Throws InfeasibleControl when u leaves [0, U].
 */
double kkt_residual(const Grid& grid, const TimeGrid& tgrid, const Trajectory& u, const Trajectory& g,
                    const Trajectory& U_bound);

/// Called with the iterate index and control after the start and every accepted step.
using IterateCallback = std::function<void(int, const Trajectory&)>;

/**
 * Projected gradient descent on the reduced cost with Armijo backtracking
 * along the projection arc. Trial steps after the first use the short
 * Barzilai-Borwein quotient <s,y>/<y,y> of the last accepted pair.
 */
OptimizeResult projected_gradient_descent(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid,
                                          const Potential& pot, const SolverConfig& solver_cfg,
                                          const OptimizerConfig& opt_cfg, const Trajectory& u_init,
                                          const IterateCallback& on_iterate = {});

}  // namespace phaseopt
