"""Orthonormal martingale bases for square-integrable jump diffusions, with
regression Monte Carlo BSDE solvers, dynamic-programming value functions, and
a monotone grid solver for the associated nonlocal HJB equation."""

from .levy_model import (
    DEFAULT_I_MAX,
    KIND_NONE,
    KIND_POINT,
    KIND_TWO_EXP,
    JumpMeasure,
    LevyModel,
    MomentTable,
    validate,
)
from .teugels_basis import OrthoBasis, build_basis, eval_p, eval_q, verify_orthonormal
from .path_sim import (
    LevyPath,
    PathEnsemble,
    TeugelsIncrements,
    empirical_bracket,
    reconstruct_L,
    simulate,
    simulate_ensemble,
    teugels_increments,
)
from .coefficients import (
    ControlDriver,
    Driver,
    ForwardCoefficient,
    Terminal,
    make_control_driver,
    make_driver,
    make_forward,
    make_terminal,
)
from .bsde_solver import (
    BsdeSolution,
    BsdeSpec,
    ComparisonReport,
    RegressionConfig,
    apriori_bound_ratio,
    check_comparison,
    solve_backward,
    solve_linear_closed_form,
)
from .control_value import (
    ControlProblem,
    DpConfig,
    DppReport,
    RegularityReport,
    ValueEstimate,
    ValueLattice,
    child_seed,
    dpp_residual,
    forward_simulate,
    regularity_diagnostics,
    semigroup_step,
    value_dp,
    verify_lipschitz,
)
from .hjb_solver import (
    CflError,
    ConvergenceRow,
    GridFunction,
    HjbConfig,
    HjbSolution,
    QuadratureRule,
    SpatialGrid,
    build_quadrature,
    cfl_dt_max,
    convergence_study,
    generator_Lu,
    hamiltonian,
    operator_Luk,
    quadrature_moment_defect,
    step_backward,
)
from .hjb_solver import solve as hjb_solve

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_I_MAX",
    "KIND_NONE",
    "KIND_POINT",
    "KIND_TWO_EXP",
    "JumpMeasure",
    "LevyModel",
    "MomentTable",
    "validate",
    "OrthoBasis",
    "build_basis",
    "eval_p",
    "eval_q",
    "verify_orthonormal",
    "LevyPath",
    "PathEnsemble",
    "TeugelsIncrements",
    "empirical_bracket",
    "reconstruct_L",
    "simulate",
    "simulate_ensemble",
    "teugels_increments",
    "ControlDriver",
    "Driver",
    "ForwardCoefficient",
    "Terminal",
    "make_control_driver",
    "make_driver",
    "make_forward",
    "make_terminal",
    "BsdeSolution",
    "BsdeSpec",
    "ComparisonReport",
    "RegressionConfig",
    "apriori_bound_ratio",
    "check_comparison",
    "solve_backward",
    "solve_linear_closed_form",
    "ControlProblem",
    "DpConfig",
    "DppReport",
    "RegularityReport",
    "ValueEstimate",
    "ValueLattice",
    "child_seed",
    "dpp_residual",
    "forward_simulate",
    "regularity_diagnostics",
    "semigroup_step",
    "value_dp",
    "verify_lipschitz",
    "CflError",
    "ConvergenceRow",
    "GridFunction",
    "HjbConfig",
    "HjbSolution",
    "QuadratureRule",
    "SpatialGrid",
    "build_quadrature",
    "cfl_dt_max",
    "convergence_study",
    "generator_Lu",
    "hamiltonian",
    "hjb_solve",
    "operator_Luk",
    "quadrature_moment_defect",
    "step_backward",
    "__version__",
]
