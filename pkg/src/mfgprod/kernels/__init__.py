"""Linear parabolic building blocks.

One backward (value-function type) Crank-Nicolson solver, one forward
conservative transport-diffusion solver, a plain tridiagonal solve, and an
independent heat-kernel Duhamel oracle.

The time-marching kernels have two interchangeable backends: a compiled
Cython extension (built at install time) and a pure numpy/scipy fallback.
The compiled one is preferred when importable; set MFGPROD_BACKEND=python
or =compiled to force a choice.  See benchmarks/bench_kernels.py for the
speed comparison.
"""

from __future__ import annotations

import dataclasses
import os

import numpy as np

from ..grid import Discretization, Field, ShapeError
from . import _march_py
from .duhamel import duhamel_propagate, heat_kernel, heat_kernel_dx

PECLET_LIMIT = 2.0

_forced = os.environ.get("MFGPROD_BACKEND", "")
if _forced == "python":
    _march = _march_py
else:
    try:
        from . import _march_c as _march  # type: ignore[no-redef]
    except ImportError:
        if _forced == "compiled":
            raise
        _march = _march_py

SingularSystemError = _march.SingularSystemError


def backend_name() -> str:
    """Which kernel backend is active: 'compiled' or 'python'."""
    return _march.BACKEND_NAME


@dataclasses.dataclass
class TridiagonalSystem:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray


@dataclasses.dataclass
class BoundarySpec:
    """Left Dirichlet series plus a right-boundary closure.

    right_kind 'dirichlet' pins the right values to `right`; 'neumann_zero'
    closes the domain with a zero-curvature (linear extrapolation) outflow
    row, appropriate for value-function solves whose gradient flattens.
    """

    left: np.ndarray
    right_kind: str = "neumann_zero"
    right: np.ndarray | None = None

    def __post_init__(self):
        if self.right_kind not in ("dirichlet", "neumann_zero"):
            raise ValueError(f"unknown right boundary kind {self.right_kind!r}")
        if self.right_kind == "dirichlet" and self.right is None:
            raise ValueError("dirichlet right boundary needs a value series")

    @classmethod
    def value_function(cls, disc: Discretization) -> "BoundarySpec":
        """Homogeneous left Dirichlet + extrapolation outflow on the right."""
        return cls(np.zeros(disc.Nt + 1), "neumann_zero")

    def check(self, disc: Discretization) -> None:
        if len(self.left) != disc.Nt + 1:
            raise ShapeError("left boundary series length must be Nt+1")
        if self.right_kind == "dirichlet" and len(self.right) != disc.Nt + 1:
            raise ShapeError("right boundary series length must be Nt+1")


def thomas_solve(sys: TridiagonalSystem) -> np.ndarray:
    """Solve the tridiagonal system; raises SingularSystemError on tiny pivots."""
    return _march.thomas(sys.lower, sys.diag, sys.upper, sys.rhs)


def solve_backward_parabolic(
    drift: Field,
    zeroth: float,
    source: Field,
    terminal: np.ndarray,
    bc: BoundarySpec,
    disc: Discretization,
    sigma: float,
) -> Field:
    """Crank-Nicolson solve of v_t + (s^2/2) v_xx + b v_x - zeroth v + source = 0.

    Marches backward from the terminal row.  Drift uses centered differences
    with a first-order upwind fallback where the cell Peclet number |b| dx / s^2
    exceeds 2.
    """
    if drift.disc != disc or source.disc != disc:
        raise ShapeError("drift/source fields must live on the given grid")
    terminal = np.asarray(terminal, dtype=float)
    if terminal.size != disc.Nx + 1:
        raise ShapeError("terminal row length must be Nx+1")
    bc.check(disc)
    right = bc.right if bc.right is not None else np.zeros(disc.Nt + 1)
    vals = _march.backward_march(
        drift.values,
        source.values,
        terminal,
        np.asarray(bc.left, dtype=float),
        0 if bc.right_kind == "dirichlet" else 1,
        np.asarray(right, dtype=float),
        disc.dx,
        disc.dt,
        sigma,
        zeroth,
        PECLET_LIMIT,
    )
    return Field(disc, vals)


def solve_forward_fp(
    drift: Field,
    source_flux: Field,
    initial: np.ndarray,
    disc: Discretization,
    sigma: float,
) -> Field:
    """Crank-Nicolson solve of mu_t = (s^2/2) mu_xx + (b mu)_x + (nu)_x.

    Homogeneous Dirichlet (absorbing) boundaries at both ends; the divergence
    terms are discretized conservatively with face fluxes taken as averages of
    the nodal fluxes, so interior mass changes only through the boundary
    fluxes.
    """
    if drift.disc != disc or source_flux.disc != disc:
        raise ShapeError("drift/source fields must live on the given grid")
    initial = np.asarray(initial, dtype=float)
    if initial.size != disc.Nx + 1:
        raise ShapeError("initial row length must be Nx+1")
    vals = _march.forward_march(
        drift.values, source_flux.values, initial, disc.dx, disc.dt, sigma
    )
    return Field(disc, vals)


__all__ = [
    "BoundarySpec",
    "PECLET_LIMIT",
    "SingularSystemError",
    "TridiagonalSystem",
    "backend_name",
    "duhamel_propagate",
    "heat_kernel",
    "heat_kernel_dx",
    "solve_backward_parabolic",
    "solve_forward_fp",
    "thomas_solve",
]
