#pragma once

#include "phaseopt/grid.hpp"
#include "phaseopt/optimizer.hpp"
#include "phaseopt/potential.hpp"
#include "phaseopt/sensitivity.hpp"
#include "phaseopt/state_solver.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace phaseopt {

struct LadderPoint {
  double lambda = 0.0;
  double error = 0.0;
};

/// Least-squares slope of log(error) against log(lambda); empty when fewer
/// than two points have a positive error.
std::optional<double> loglog_slope(const std::vector<LadderPoint>& ladder);

struct FdGradientReport {
  std::vector<LadderPoint> ladder;
  std::optional<double> slope;
  /// <g, h>_Q from the discrete adjoint.
  double adjoint_derivative = 0.0;
};

/// error(lambda) = |(J(u + lambda h) - J(u)) / lambda - <g, h>_Q|.
FdGradientReport fd_gradient_check(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid,
                                   const Potential& pot, const SolverConfig& cfg, const Trajectory& u,
                                   const Trajectory& h, const std::vector<double>& lambdas);

/// (J(u + lambda h) - J(u - lambda h)) / (2 lambda).
double central_difference(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
                          const SolverConfig& cfg, const Trajectory& u, const Trajectory& h, double lambda);

/// Norm of a state remainder (y for rho, z for mu): y in H1(0,T;H) n C0(V) n L2(W),
/// z in C0(H) n L2(V), all in their discrete forms.
double remainder_norm(const Grid& grid, const TimeGrid& tgrid, const Trajectory& y, const Trajectory& z);

struct RemainderReport {
  std::vector<LadderPoint> ladder;
  std::optional<double> slope;
};

/// R(lambda) = |S(u + lambda h) - S(u) - lambda (xi, eta)| in remainder_norm.
RemainderReport tangent_remainder_check(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid,
                                        const Potential& pot, const SolverConfig& cfg, const Trajectory& u,
                                        const Trajectory& h, const std::vector<double>& lambdas);

struct StabilityReport {
  /// max over t of the Lipschitz-estimate left side over int_0^t |u1 - u2|_H^2.
  double ratio = 0.0;
  /// Same with the stronger norms (rho_t in V, rho in W, mu_t in H).
  double ratio_strong = 0.0;
  bool degenerate = false;
};

StabilityReport stability_ratio_check(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid,
                                      const Potential& pot, const SolverConfig& cfg, const Trajectory& u1,
                                      const Trajectory& u2);

struct OracleReport {
  double max_error = 0.0;
  double rho_error = 0.0;
  double mu_error = 0.0;
};

/**
 * Compares a spatially uniform run with the reduced ODE system
 *   (eps + 2 rho) mu' + mu rho' = u,  delta rho' + f'(rho) = mu
 * integrated by an adaptive Dormand-Prince method (tolerance 1e-10).
 * Throws InvalidArgument when rho0, mu0 or u vary in space.
 */
OracleReport ode_oracle_check(const ProblemData& data, const Trajectory& u, const Grid& grid, const TimeGrid& tgrid,
                              const Potential& pot, const SolverConfig& cfg);

struct BoundViolation {
  std::string quantity;
  int level = 0;
  int cell = 0;
  double value = 0.0;
};

struct BoundsReport {
  bool pass = true;
  double rho_lower = 0.0;
  double rho_upper = 0.0;
  double mu_upper = 0.0;
  double mu_lower = 0.0;
  std::optional<BoundViolation> violation;
};

BoundsReport bounds_check(const StateTrajectory& state, const Diagnostics& diag);

/// Uniform per cell in [lo, hi], then one implicit smoothing step (I - c L)^{-1}
/// per level with c = (length/10)^2, finally clipped to [lo, hi].
Trajectory random_control(const Grid& grid, const TimeGrid& tgrid, const Trajectory& lo, const Trajectory& hi,
                          std::uint64_t seed);
Trajectory random_control(const Grid& grid, const TimeGrid& tgrid, double lo, double hi, std::uint64_t seed);

/// Data carried from (n, N) to the (2n, 2N) refinement of the same domain and horizon.
struct RefinedProblem {
  Grid grid;
  TimeGrid tgrid;
  ProblemData data;
};

/// Piecewise constant transfer of a field to the grid with every axis halved.
Field prolong_field(const Grid& coarse, const Grid& fine, const Field& v);
/// Piecewise constant in space, linear in time (level 2k+1 averages k and k+1).
Trajectory prolong_trajectory(const Grid& coarse, const Grid& fine, const Trajectory& v);
RefinedProblem refine_problem(const ProblemData& data, const Grid& grid, const TimeGrid& tgrid);

/// FNV-1a 64-bit hash, hex encoded.
std::string config_hash(const std::string& text);

struct CheckReport {
  std::string name;
  bool pass = false;
  nlohmann::json metrics;
  std::uint64_t seed = 0;
  std::string config_hash;

  nlohmann::json to_json() const;
};

}  // namespace phaseopt
