#pragma once

#include "phaseopt/grid.hpp"
#include "phaseopt/potential.hpp"

#include <optional>
#include <string>
#include <vector>

namespace phaseopt {

/// Time quadrature of the beta1 mu-tracking term. Level N carries no weight:
/// mu^N never feeds back into rho, so the adjoint q vanishes there exactly.
inline constexpr TimeRule kTrackingRule = TimeRule::Left;
/// Time quadrature for controls. The mu-step n -> n+1 is driven by u^{n+1},
/// so level 0 of a control never enters the scheme.
inline constexpr TimeRule kControlRule = TimeRule::Right;

struct SolverConfig {
  double newton_tol = 1e-10;
  int newton_max = 50;
  /// Fraction-to-boundary parameter: each Newton iterate keeps at least this
  /// fraction of its current distance to {0, 1}.
  double boundary_margin = 0.1;
  int coupling_iters = 1;
  double linear_tol = 1e-12;
  double bound_tol = 1e-10;

  void validate() const;
};

/// Coefficients, control bound, targets and initial data of the control problem.
struct ProblemData {
  double epsilon = 1.0;
  double delta = 1.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  Trajectory U_bound;
  Field rho_T;
  Trajectory mu_T;
  Field rho0;
  Field mu0;

  /// Shape checks plus inf rho0 > 0, sup rho0 < 1, mu0 >= 0, U >= 0.
  void validate(const Grid& grid, const TimeGrid& tgrid) const;
};

/// Per-step inner iterates when coupling_iters > 1: sweep s of step n -> n+1.
struct SweepRecord {
  std::vector<Field> rho;
  std::vector<Field> mu;
};

struct StateTrajectory {
  Trajectory rho;
  Trajectory mu;
  /// Empty when coupling_iters == 1; else sweeps[n] holds all sweeps of step n -> n+1.
  std::vector<SweepRecord> sweeps;
};

struct Diagnostics {
  double rho_min = 0.0;
  double rho_max = 0.0;
  double mu_min = 0.0;
  double mu_max = 0.0;
  double bound_tol = 0.0;
  /// Smallest diagonal coefficient eps + 3 rho^{n+1} - rho^n seen in any mu-step.
  double min_mu_coefficient = 0.0;
  std::vector<int> newton_iters;
  std::vector<std::vector<double>> newton_residuals;
  bool rho_interior = true;
  bool mu_nonnegative = true;
  bool m_matrix = true;
  /// Named stability ratios, filled by the verification checks.
  std::vector<std::pair<std::string, double>> ratios;
};

struct RhoStepResult {
  Field rho;
  int iterations = 0;
  std::vector<double> residuals;
};

struct MuStepResult {
  Field mu;
  double min_coefficient = 0.0;
  bool m_matrix = true;
};

struct StateSolution {
  StateTrajectory state;
  Diagnostics diagnostics;
};

/// Newton solve of delta (r - rho_n)/tau - L r + f'(r) = mu_rhs, warm-started at
/// `guess` (rho_n when absent). Throws NewtonDivergence.
RhoStepResult step_rho(const Grid& grid, const Field& rho_n, const Field& mu_rhs, const Potential& pot, double delta,
                       double tau, const SolverConfig& cfg, const std::optional<Field>& guess = std::nullopt);

/// Linear solve of [(eps + 2 rho^{n+1}) + (rho^{n+1} - rho^n)] mu / tau - L mu
///   = u^{n+1} + (eps + 2 rho^{n+1}) mu^n / tau.
/// Throws NonpositiveCoefficient when the bracket is <= 0 anywhere.
MuStepResult step_mu(const Grid& grid, const Field& rho_n, const Field& rho_np1, const Field& mu_n, const Field& u_np1,
                     double epsilon, double tau, const SolverConfig& cfg);

StateSolution solve_state(const ProblemData& data, const Trajectory& u, const Grid& grid, const TimeGrid& tgrid,
                          const Potential& pot, const SolverConfig& cfg);

/// Throws InfeasibleControl unless -tol <= u <= U + tol everywhere.
void require_feasible(const Trajectory& u, const Trajectory& U_bound, double tol, const char* what);

/// L2 norms of the discrete residuals of both equations; entry n belongs to step n -> n+1.
struct StepResiduals {
  std::vector<double> rho;
  std::vector<double> mu;
};

StepResiduals residual_norms(const StateTrajectory& state, const Trajectory& u, const ProblemData& data,
                             const Grid& grid, const TimeGrid& tgrid, const Potential& pot);

}  // namespace phaseopt
