"""Mean field game of exhaustible-resource production.

Numerical library and CLI for the coupled forward-backward PDE system of the
production game, the Taylor cascade of its solution in the competition
parameter, and the harness verifying that the order-k Taylor remainder
shrinks at order k+1.
"""

from .cascade import TaylorTable, build_table, solve_order0, solve_order_k, taylor_eval
from .diagnostics import DiagnosticSeries, duality_residual, energy_series, mass_and_moment
from .grid import Discretization, Field, NormTriple, diff_x, discrete_norms, trapezoid
from .kernels import (
    BoundarySpec,
    SingularSystemError,
    TridiagonalSystem,
    backend_name,
    duhamel_propagate,
    solve_backward_parabolic,
    solve_forward_fp,
    thomas_solve,
)
from .mfg_solver import (
    DivergenceError,
    LinearizedSolution,
    MFGSolution,
    SolveOptions,
    solve_linearized,
    solve_mfg,
)
from .model import (
    FunctionSpec,
    ModelParams,
    TimeProfile,
    assemble_J_K,
    eval_alpha_beta,
    eval_F,
    eval_F_k_full,
    eval_F_k_split,
)
from .sensitivity import (
    SensitivityReport,
    estimate_log_epsilon0,
    fd_derivative_oracle,
    log_epsilon0_from_norms,
    remainder_study,
)

__version__ = "0.1.0"
