"""Coupled forward-backward solvers.

`solve_mfg` computes the equilibrium (u, m) of the nonlinear production game
at a given competition parameter by a damped Picard loop: policy iteration on
the backward value equation given the current density statistics, then a
forward density solve with the induced production rate.  `solve_linearized`
solves the abstract linear forward-backward system (the one the sensitivity
theory is built on) by the same damped Picard fixed point.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .grid import Discretization, Field, diff_x, trapezoid
from .kernels import BoundarySpec, solve_backward_parabolic, solve_forward_fp
from .model import ModelParams, eval_alpha_beta


class DivergenceError(RuntimeError):
    """Fixed-point iteration failed to reach tolerance."""

    def __init__(self, message, residual_history):
        super().__init__(message)
        self.residual_history = list(residual_history)


@dataclasses.dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 200
    damping: float = 0.5
    policy_max_iter: int = 30
    verbose: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclasses.dataclass
class MFGSolution:
    u: Field
    m: Field
    F: Field
    eta: np.ndarray  # time series of int u_x m dx
    iterations: int
    residual: float


@dataclasses.dataclass
class LinearizedSolution:
    w: Field
    mu: Field
    G: np.ndarray
    iterations: int
    residual: float


def _weights_series(params: ModelParams, disc: Discretization, epsilon: float):
    """alpha(eps*xi(t_n)) and beta(eps*xi(t_n)) per time node."""
    xi = np.array([float(params.xi(t, params.T)) for t in disc.t])
    ab = np.array([eval_alpha_beta(epsilon * x, 0) for x in xi])
    return ab[:, 0], ab[:, 1]


def _policy_iteration(A, F_prev, terminal, params, disc, opts):
    """Solve the backward value equation for a fixed coupling series A(t).

    The squared production rate is linearized about the previous rate
    (2 F_prev F_new - F_prev^2 with F_new = A - u_x/2), giving one linear
    backward solve per sweep; this is Newton's method on the quadratic
    Hamiltonian and converges in a handful of sweeps.
    """
    bc = BoundarySpec.value_function(disc)
    u = None
    for _ in range(opts.policy_max_iter):
        Fv = F_prev.values
        source = Field(disc, 2.0 * A[:, None] * Fv - Fv**2)
        u_new = solve_backward_parabolic(
            Field(disc, -Fv), params.r, source, terminal, bc, disc, params.sigma
        )
        F_new = Field(disc, A[:, None] - 0.5 * diff_x(u_new.values, disc))
        if u is not None and np.max(np.abs(u_new.values - u.values)) <= opts.tol / 10:
            return u_new, F_new
        u, F_prev = u_new, F_new
    raise DivergenceError("policy iteration did not converge", [])


def solve_standalone_hjb(A, params, disc, opts, F_init=None):
    """Value equation alone (density statistics frozen in the series A)."""
    terminal = np.asarray(params.uT(disc.x), dtype=float)
    terminal[0] = 0.0
    if F_init is None:
        uTx = diff_x(terminal, disc)
        F_init = Field(disc, A[:, None] - 0.5 * uTx[None, :])
    return _policy_iteration(A, F_init, terminal, params, disc, opts)


def solve_mfg(params: ModelParams, disc: Discretization, opts: SolveOptions) -> MFGSolution:
    """Damped Picard solve of the coupled production game at params.epsilon."""
    alpha, beta = _weights_series(params, disc, params.epsilon)
    initial = np.asarray(params.M(disc.x), dtype=float)
    zero = Field.zeros(disc)

    eta = np.zeros(disc.Nt + 1)
    A = 0.5 * (alpha + beta * eta)
    u, F = solve_standalone_hjb(A, params, disc, opts)
    m = solve_forward_fp(F, zero, initial, disc, params.sigma)
    eta = trapezoid(diff_x(u.values, disc) * m.values, disc)

    history = []
    theta = opts.damping
    for it in range(1, opts.max_iter + 1):
        A = 0.5 * (alpha + beta * eta)
        u_new, F_new = solve_standalone_hjb(A, params, disc, opts, F_init=F)
        m_new = solve_forward_fp(F_new, zero, initial, disc, params.sigma)
        eta_raw = trapezoid(diff_x(u_new.values, disc) * m_new.values, disc)

        m_next = Field(disc, (1 - theta) * m.values + theta * m_new.values)
        eta_next = (1 - theta) * eta + theta * eta_raw
        res = max(
            float(np.max(np.abs(u_new.values - u.values))),
            float(np.max(np.abs(m_next.values - m.values))),
            float(np.max(np.abs(eta_next - eta))),
        )
        history.append(res)
        if opts.verbose:
            print(f"iter,residual {it},{res:.3e}")
        u, F, m, eta = u_new, F_new, m_next, eta_next
        if res <= opts.tol:
            # report the undamped density so the returned triple is an exact
            # solution of the discrete system at the fixed point
            return MFGSolution(u, m_new, F, eta_raw, it, res)
    raise DivergenceError(
        f"outer iteration exceeded {opts.max_iter} sweeps (last residual "
        f"{history[-1]:.3e})",
        history,
    )


def solve_linearized(
    base: MFGSolution,
    Psi: Field,
    Phi: Field,
    epsilon: float,
    params: ModelParams,
    disc: Discretization,
    opts: SolveOptions,
) -> LinearizedSolution:
    """Picard solve of the abstract linear forward-backward system.

    Given the frozen base solution, iterates: evaluate the scalar coupling
    series G from the previous (w, mu), solve the backward equation with
    source Psi + F0*G, then the forward equation with flux source
    Phi + (G - w_x) m0 / 2.  When the coupling weight beta(eps*xi) vanishes
    identically the first pass is already exact.
    """
    _, beta = _weights_series(params, disc, epsilon)
    F0 = base.F.values
    m0 = base.m.values
    u0x = diff_x(base.u.values, disc)
    bc = BoundarySpec.value_function(disc)
    zero_row = np.zeros(disc.Nx + 1)
    terminal = np.zeros(disc.Nx + 1)

    def sweep(w_vals, mu_vals):
        G_prev = beta * trapezoid(u0x * mu_vals + m0 * diff_x(w_vals, disc), disc)
        src = Field(disc, Psi.values + F0 * G_prev[:, None])
        w_new = solve_backward_parabolic(
            Field(disc, -F0), params.r, src, terminal, bc, disc, params.sigma
        )
        wx = diff_x(w_new.values, disc)
        G_new = beta * trapezoid(u0x * mu_vals + m0 * wx, disc)
        flux = Field(disc, Phi.values + 0.5 * (G_new[:, None] - wx) * m0)
        mu_new = solve_forward_fp(
            Field(disc, F0), flux, zero_row, disc, params.sigma
        )
        return w_new, mu_new, G_new

    w = np.zeros((disc.Nt + 1, disc.Nx + 1))
    mu = np.zeros_like(w)
    if np.max(np.abs(beta)) == 0.0:
        w_new, mu_new, G = sweep(w, mu)
        return LinearizedSolution(w_new, mu_new, G, 1, 0.0)

    theta = opts.damping
    history = []
    for it in range(1, opts.max_iter + 1):
        w_new, mu_new, G = sweep(w, mu)
        res = max(
            float(np.max(np.abs(w_new.values - w))),
            float(np.max(np.abs(mu_new.values - mu))),
        )
        history.append(res)
        if opts.verbose:
            print(f"iter,residual {it},{res:.3e}")
        if res <= opts.tol:
            return LinearizedSolution(w_new, mu_new, G, it, res)
        w = (1 - theta) * w + theta * w_new.values
        mu = (1 - theta) * mu + theta * mu_new.values
    raise DivergenceError(
        f"linearized Picard iteration exceeded {opts.max_iter} sweeps", history
    )
