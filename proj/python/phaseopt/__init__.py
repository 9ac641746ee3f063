"""Phase-field optimal control: state, tangent and adjoint solvers, projected gradient and checks.

Fields are 1-D arrays of length ``grid.cells``; space-time quantities are
``(levels, cells)`` arrays with ``levels = N + 1``.
"""

from ._core import (
    AdjointMode,
    ConfigError,
    DomainViolation,
    Grid,
    InfeasibleControl,
    InvalidArgument,
    LinearSolveFailure,
    MissingKey,
    NewtonDivergence,
    NonpositiveCoefficient,
    OptimizerConfig,
    ParseError,
    PhaseoptError,
    Potential,
    ProblemData,
    RunConfig,
    ShapeMismatch,
    SolverConfig,
    SolverError,
    TimeGrid,
    UnsupportedDimension,
    ValidationError,
    cost,
    fd_gradient_check,
    kkt_residual,
    ode_oracle_check,
    optimize,
    parse_config,
    project_control,
    random_control,
    reduced_gradient,
    run_command,
    solve_adjoint,
    solve_state,
    solve_tangent,
    tangent_remainder_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
