"""Closed-form model layer for the production game.

Houses the problem data (diffusion, discount, horizon, competition parameter,
the substitutability profile xi, initial density M, terminal cost u_T), the
market-coupling weights alpha/beta together with their derivatives in the
competition parameter, the equilibrium production rate F, its order-k
derivatives in split form, and the order-k source assemblies feeding the
perturbation cascade.

All derivative formulas are hard-coded closed forms; tests validate them
against Richardson finite differences.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .grid import Discretization, trapezoid

MAX_DERIVATIVE_ORDER = 12


class MissingOrderError(ValueError):
    """A source assembly was asked for an order whose lower orders are absent."""


@dataclasses.dataclass(frozen=True)
class TimeProfile:
    """Substitutability profile xi: [0, T] -> [0, 1] with xi(T) = 0."""

    family: str = "linear_decay"
    params: tuple = ()

    _FAMILIES = ("linear_decay", "smooth_bump", "constant_zero")

    def __post_init__(self):
        if self.family not in self._FAMILIES:
            raise ValueError(f"unknown time profile family {self.family!r}")

    def __call__(self, t, T: float):
        t = np.asarray(t, dtype=float)
        if self.family == "linear_decay":
            out = np.clip(1.0 - t / T, 0.0, 1.0)
        elif self.family == "smooth_bump":
            p = self.params[0] if self.params else 1.0
            out = np.cos(0.5 * np.pi * np.clip(t / T, 0.0, 1.0)) ** (2 * p)
        else:
            out = np.zeros_like(t)
        return out if out.ndim else float(out)


@dataclasses.dataclass(frozen=True)
class FunctionSpec:
    """Spatial function family for initial density / terminal cost data."""

    family: str
    params: tuple = ()

    _FAMILIES = ("gamma4_density", "smooth_terminal", "zero", "affine", "custom_table")

    def __post_init__(self):
        if self.family not in self._FAMILIES:
            raise ValueError(f"unknown function family {self.family!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "gamma4_density":
            # x^3 e^{-x/theta} / (6 theta^4): value, slope and curvature all
            # vanish at x=0, satisfying the corner compatibility conditions.
            theta = self.params[0] if self.params else 1.0
            out = x**3 * np.exp(-x / theta) / (6.0 * theta**4)
        elif self.family == "smooth_terminal":
            # x e^{-(x/w)^2}: value 0, slope 1, curvature 0 at x=0.
            w = self.params[0] if self.params else 1.0
            out = x * np.exp(-((x / w) ** 2))
        elif self.family == "zero":
            out = np.zeros_like(x)
        elif self.family == "affine":
            a, b = self.params
            out = a + b * x
        else:  # custom_table: interleaved x0,y0,x1,y1,... with linear interpolation
            pts = np.asarray(self.params, dtype=float).reshape(-1, 2)
            out = np.interp(x, pts[:, 0], pts[:, 1])
        return out if out.ndim else float(out)


@dataclasses.dataclass(frozen=True)
class ModelParams:
    """Problem data for the coupled production game."""

    sigma: float = 1.0
    r: float = 0.3
    T: float = 1.0
    epsilon: float = 0.05
    xi: TimeProfile = TimeProfile("linear_decay")
    M: FunctionSpec = FunctionSpec("gamma4_density", (1.0,))
    uT: FunctionSpec = FunctionSpec("smooth_terminal", (1.0,))
    mass_tail_tol: float = 5e-3

    def __post_init__(self):
        if self.sigma <= 0 or self.r <= 0 or self.T <= 0:
            raise ValueError("sigma, r and T must be positive")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be finite and nonnegative")

    def with_epsilon(self, epsilon: float) -> "ModelParams":
        return dataclasses.replace(self, epsilon=epsilon)

    def validate(self, disc: Discretization) -> None:
        """Check the data invariants on the given grid; raise ValueError on violation."""
        ts = disc.t
        xi_vals = np.atleast_1d(self.xi(ts, self.T))
        if np.any(xi_vals < -1e-14) or np.any(xi_vals > 1 + 1e-14):
            raise ValueError("xi must take values in [0, 1]")
        if abs(float(self.xi(self.T, self.T))) > 1e-14:
            raise ValueError("xi(T) must be 0")
        m_vals = np.atleast_1d(self.M(disc.x))
        if abs(m_vals[0]) > 1e-14:
            raise ValueError("initial density M must vanish at x = 0")
        if np.any(m_vals < -1e-14):
            raise ValueError("initial density M must be nonnegative")
        mass = trapezoid(m_vals, disc)
        if mass > 1 + 1e-10 or mass < 1 - self.mass_tail_tol:
            raise ValueError(
                f"initial mass {mass:.6g} outside [1 - {self.mass_tail_tol}, 1]; "
                "enlarge L or adjust M"
            )
        if abs(float(self.uT(0.0))) > 1e-14:
            raise ValueError("terminal cost u_T must vanish at x = 0")


def eval_alpha_beta(epsilon: float, k: int = 0) -> tuple[float, float]:
    """k-th derivatives of the market weights alpha, beta at epsilon.

    k = 0 returns (2/(2+eps), eps/(2+eps)); for k >= 1 the derivatives are
    2(-1)^k k! / (2+eps)^(k+1) and its negative.  alpha + beta == 1, so the
    derivatives cancel exactly for every k >= 1.
    """
    if not (0 <= k <= MAX_DERIVATIVE_ORDER):
        raise ValueError(f"derivative order must be in [0, {MAX_DERIVATIVE_ORDER}]")
    if k == 0:
        return 2.0 / (2.0 + epsilon), epsilon / (2.0 + epsilon)
    a = 2.0 * (-1.0) ** k * math.factorial(k) / (2.0 + epsilon) ** (k + 1)
    return a, -a


def eval_F(
    ux_row: np.ndarray,
    m_row: np.ndarray,
    t: float,
    epsilon: float,
    params: ModelParams,
    disc: Discretization,
) -> np.ndarray:
    """Equilibrium production rate F = (alpha + beta * int(u_x m) - u_x) / 2."""
    ux_row = np.asarray(ux_row, dtype=float)
    m_row = np.asarray(m_row, dtype=float)
    if ux_row.shape != m_row.shape:
        raise ValueError("u_x and m rows must share a discretization")
    xt = float(params.xi(t, params.T))
    a, b = eval_alpha_beta(epsilon * xt, 0)
    eta = trapezoid(ux_row * m_row, disc)
    return 0.5 * (a + b * eta - ux_row)


def eval_F_k_split(
    k: int,
    ux_rows: Sequence[np.ndarray],
    m_rows: Sequence[np.ndarray],
    epsilon: float,
    t: float,
    params: ModelParams,
    disc: Discretization,
) -> tuple[np.ndarray, float]:
    """Known part of the k-th derivative of F, plus its coupling coefficient.

    `ux_rows` and `m_rows` hold the spatial rows of orders 0..k-1 at time t.
    The full derivative is recovered from the returned pieces as

        F_k = known + (coupling/2) * int(ux_0 m_k + ux_k m_0) - ux_k / 2,

    which isolates every appearance of the order-k unknowns.  The trailing
    gradient carries the factor 1/2 (the form consistent with direct
    differentiation of F and with the abstract linear system).
    """
    if k < 1:
        raise ValueError("split form is defined for k >= 1")
    if len(ux_rows) < k or len(m_rows) < k:
        raise MissingOrderError(f"orders 0..{k - 1} required, got {len(ux_rows)}")
    xt = float(params.xi(t, params.T))
    known = 0.5 * xt**k * eval_alpha_beta(epsilon * xt, k)[0] * np.ones(disc.Nx + 1)
    for i in range(k + 1):
        bi = eval_alpha_beta(epsilon * xt, i)[1] if i > 0 else eval_alpha_beta(epsilon * xt, 0)[1]
        for j in range(k - i + 1):
            if i == 0 and j in (0, k):
                continue  # order-k unknowns, withheld from the known part
            weight = math.comb(k, i) * math.comb(k - i, j) * xt**i * bi
            if weight == 0.0:
                continue
            known = known + 0.5 * weight * trapezoid(
                ux_rows[j] * m_rows[k - i - j], disc
            )
    coupling = eval_alpha_beta(epsilon * xt, 0)[1]
    return known, coupling


def eval_F_k_full(
    k: int,
    ux_rows: Sequence[np.ndarray],
    m_rows: Sequence[np.ndarray],
    epsilon: float,
    t: float,
    params: ModelParams,
    disc: Discretization,
) -> np.ndarray:
    """Full k-th derivative of F from rows of orders 0..k."""
    if k == 0:
        return eval_F(ux_rows[0], m_rows[0], t, epsilon, params, disc)
    if len(ux_rows) < k + 1 or len(m_rows) < k + 1:
        raise MissingOrderError(f"orders 0..{k} required")
    known, coupling = eval_F_k_split(k, ux_rows, m_rows, epsilon, t, params, disc)
    cross = trapezoid(ux_rows[0] * m_rows[k] + ux_rows[k] * m_rows[0], disc)
    return known + 0.5 * coupling * cross - 0.5 * ux_rows[k]


def assemble_J_K(
    k: int,
    ux_rows: Sequence[np.ndarray],
    m_rows: Sequence[np.ndarray],
    epsilon: float,
    t: float,
    params: ModelParams,
    disc: Discretization,
) -> tuple[np.ndarray, np.ndarray]:
    """Order-k sources with every order-k term withheld.

    Returns (J_known, K_known): the parts of the order-k HJB source
    J_k = sum_j C(k,j) F_j F_{k-j} and transport flux
    K_k = sum_j C(k,j) F_j m_{k-j} built entirely from orders < k.  The
    withheld order-k structure is exactly the drift / coupling / gradient-flux
    skeleton of the abstract linear system, which the solvers supply.
    """
    if k < 1:
        raise ValueError("source assembly is defined for k >= 1")
    if len(ux_rows) < k or len(m_rows) < k:
        raise MissingOrderError(f"orders 0..{k - 1} required, got {len(ux_rows)}")
    F_rows = [
        eval_F_k_full(j, ux_rows, m_rows, epsilon, t, params, disc) for j in range(k)
    ]
    known_k, _ = eval_F_k_split(k, ux_rows, m_rows, epsilon, t, params, disc)
    J = 2.0 * F_rows[0] * known_k
    K = known_k * m_rows[0]
    for j in range(1, k):
        c = math.comb(k, j)
        J = J + c * F_rows[j] * F_rows[k - j]
        K = K + c * F_rows[j] * m_rows[k - j]
    return J, K
