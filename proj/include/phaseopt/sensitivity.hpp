#pragma once

#include "phaseopt/grid.hpp"
#include "phaseopt/potential.hpp"
#include "phaseopt/state_solver.hpp"

namespace phaseopt {

/// Directional derivative (xi, eta) of the discrete control-to-state map.
struct TangentTrajectory {
  Trajectory xi;
  Trajectory eta;
};

struct AdjointTrajectory {
  Trajectory p;
  Trajectory q;
};

enum class AdjointMode {
  /// Exact transpose of the discrete tangent map (gradient of the discrete cost).
  Discrete,
  /// Staggered backward scheme for the continuous adjoint system.
  Pde,
};

/**
 * Linearization of solve_state around `state` in direction h.
 *
 * Mirrors the forward staggering: each coupling sweep linearizes the rho Newton
 * solve (operator delta/tau - L + f''(rho)) and then the mu-step including the
 * derivative of its rho-dependent coefficients. Level 0 is zero.
 */
TangentTrajectory solve_tangent(const StateTrajectory& state, const Trajectory& h, const ProblemData& data,
                                const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
                                const SolverConfig& cfg);

/**
 * Backward adjoint march.
 *
 * Both modes satisfy q^N = 0 and delta p^N = rho(T) - rho_T exactly. In
 * Discrete mode <q, h>_Q (control rule) equals the derivative of the tracking
 * part of the discrete cost for every h.
 */
AdjointTrajectory solve_adjoint(const StateTrajectory& state, const ProblemData& data, const Grid& grid,
                                const TimeGrid& tgrid, const Potential& pot, const SolverConfig& cfg,
                                AdjointMode mode = AdjointMode::Discrete);

struct DualityPair {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = <rho(T) - rho_T, xi(T)>_H + beta1 <mu - mu_T, eta>_Q, rhs = <q, h>_Q.
DualityPair duality_pairing(const StateTrajectory& state, const TangentTrajectory& tangent,
                            const AdjointTrajectory& adjoint, const Trajectory& h, const ProblemData& data,
                            const Grid& grid, const TimeGrid& tgrid);

}  // namespace phaseopt
