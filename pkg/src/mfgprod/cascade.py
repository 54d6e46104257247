"""Perturbation cascade: Taylor coefficients of (u, m) in the competition
parameter at its decoupling point.

At zero competition the coupling weight beta vanishes, so each order requires
only two decoupled linear parabolic solves: a backward one for the value
coefficient (sources assembled from lower orders) and a forward one for the
density coefficient.
"""

from __future__ import annotations

import dataclasses
import json
import math
import pathlib

import numpy as np

from .grid import Discretization, Field, diff_x, discrete_norms
from .kernels import BoundarySpec, solve_backward_parabolic, solve_forward_fp
from .model import MissingOrderError, ModelParams, assemble_J_K
from .mfg_solver import SolveOptions, solve_standalone_hjb

MAX_ORDER = 12


@dataclasses.dataclass
class TaylorTable:
    """Cascade output: (u_k, m_k) pairs for k = 0..K, expanded at epsilon 0."""

    K: int
    pairs: list  # [(u_k: Field, m_k: Field), ...]
    base_params: ModelParams
    F0: Field

    def __post_init__(self):
        if len(self.pairs) != self.K + 1:
            raise ValueError("pairs length must be K+1")

    @property
    def disc(self) -> Discretization:
        return self.pairs[0][0].disc


def solve_order0(params: ModelParams, disc: Discretization, opts: SolveOptions):
    """Order 0: standalone backward solve, then one forward density solve."""
    if params.epsilon != 0:
        raise ValueError("order-0 cascade requires epsilon = 0")
    A = np.full(disc.Nt + 1, 0.5)  # alpha(0)/2; beta(0) = 0 kills the coupling
    u0, F0 = solve_standalone_hjb(A, params, disc, opts)
    initial = np.asarray(params.M(disc.x), dtype=float)
    m0 = solve_forward_fp(F0, Field.zeros(disc), initial, disc, params.sigma)
    return u0, m0, F0


def solve_order_k(table: TaylorTable, k: int, disc: Discretization, opts: SolveOptions):
    """Order k >= 1: two linear solves, no iteration (the coupling vanishes)."""
    if k < 1:
        raise ValueError("use solve_order0 for k = 0")
    if len(table.pairs) < k:
        raise MissingOrderError(f"table holds orders 0..{len(table.pairs) - 1}, need {k - 1}")
    params = table.base_params
    ux_rows = [diff_x(u.values, disc) for u, _ in table.pairs[:k]]
    m_rows = [m.values for _, m in table.pairs[:k]]

    J = np.empty((disc.Nt + 1, disc.Nx + 1))
    K = np.empty_like(J)
    for n, t in enumerate(disc.t):
        J[n], K[n] = assemble_J_K(
            k,
            [r[n] for r in ux_rows],
            [r[n] for r in m_rows],
            0.0,
            float(t),
            params,
            disc,
        )

    F0 = table.F0
    bc = BoundarySpec.value_function(disc)
    u_k = solve_backward_parabolic(
        Field(disc, -F0.values),
        params.r,
        Field(disc, J),
        np.zeros(disc.Nx + 1),
        bc,
        disc,
        params.sigma,
    )
    ukx = diff_x(u_k.values, disc)
    flux = Field(disc, K - 0.5 * ukx * m_rows[0])
    m_k = solve_forward_fp(F0, flux, np.zeros(disc.Nx + 1), disc, params.sigma)
    return u_k, m_k


def build_table(
    params: ModelParams, disc: Discretization, opts: SolveOptions, K: int
) -> TaylorTable:
    """Run the cascade through order K at epsilon = 0."""
    if not 0 <= K <= MAX_ORDER:
        raise ValueError(f"K must be in [0, {MAX_ORDER}]")
    base = params.with_epsilon(0.0)
    u0, m0, F0 = solve_order0(base, disc, opts)
    table = TaylorTable(0, [(u0, m0)], base, F0)
    for k in range(1, K + 1):
        u_k, m_k = solve_order_k(table, k, disc, opts)
        table = TaylorTable(k, table.pairs + [(u_k, m_k)], base, F0)
    return table


def taylor_eval(table: TaylorTable, epsilon: float, k: int):
    """Order-k Taylor partial sum: sum_j eps^j / j! (u_j, m_j)."""
    if not 0 <= k <= table.K:
        raise ValueError(f"order {k} outside table range 0..{table.K}")
    disc = table.disc
    u = np.zeros((disc.Nt + 1, disc.Nx + 1))
    m = np.zeros_like(u)
    for j in range(k + 1):
        w = epsilon**j / math.factorial(j)
        u += w * table.pairs[j][0].values
        m += w * table.pairs[j][1].values
    return Field(disc, u), Field(disc, m)


def save_table(table: TaylorTable, directory) -> None:
    """One CSV per (order, field) plus a JSON manifest with per-order norms."""
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    norms = []
    for k, (u_k, m_k) in enumerate(table.pairs):
        (directory / f"u_{k}.csv").write_text(u_k.to_csv())
        (directory / f"m_{k}.csv").write_text(m_k.to_csv())
        norms.append(
            {"k": k, "u": discrete_norms(u_k).as_dict(), "m": discrete_norms(m_k).as_dict()}
        )
    (directory / "F_0.csv").write_text(table.F0.to_csv())
    disc = table.disc
    p = table.base_params
    manifest = {
        "schema_version": 1,
        "K": table.K,
        "params": {"sigma": p.sigma, "r": p.r, "T": p.T, "epsilon": p.epsilon},
        "disc": {"L": disc.L, "Nx": disc.Nx, "Nt": disc.Nt, "T": disc.T},
        "norms": norms,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
