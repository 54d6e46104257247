"""Uniform space-time grid on [0, L] x [0, T], quadrature and difference operators.

The spatial domain is a truncation of the half line; all integrals over
[0, infinity) in the model are realized as trapezoid sums over [0, L].
"""

from __future__ import annotations

import dataclasses
import io

import numpy as np


class ShapeError(ValueError):
    """Row or field shape does not match the discretization."""


@dataclasses.dataclass(frozen=True)
class Discretization:
    """Uniform grid: x_i = i*dx (i = 0..Nx), t_n = n*dt (n = 0..Nt)."""

    L: float
    Nx: int
    Nt: int
    T: float

    def __post_init__(self):
        if self.L <= 0 or self.T <= 0:
            raise ValueError("L and T must be positive")
        if self.Nx < 8 or self.Nt < 8:
            raise ValueError("Nx and Nt must be at least 8")

    @property
    def dx(self) -> float:
        return self.L / self.Nx

    @property
    def dt(self) -> float:
        return self.T / self.Nt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.Nx + 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.Nt + 1)

    def refine(self, factor: int = 2) -> "Discretization":
        return Discretization(self.L, self.Nx * factor, self.Nt * factor, self.T)


@dataclasses.dataclass
class Field:
    """Time-indexed family of spatial rows: values[n, i] at (t_n, x_i)."""

    disc: Discretization
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.disc.Nt + 1, self.disc.Nx + 1):
            raise ShapeError(
                f"field shape {self.values.shape} does not match grid "
                f"({self.disc.Nt + 1}, {self.disc.Nx + 1})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite entries")

    @classmethod
    def zeros(cls, disc: Discretization) -> "Field":
        return cls(disc, np.zeros((disc.Nt + 1, disc.Nx + 1)))

    @classmethod
    def from_function(cls, disc: Discretization, fn) -> "Field":
        """Tabulate fn(t, x) on the grid; fn must broadcast over numpy arrays."""
        t = disc.t[:, None]
        x = disc.x[None, :]
        vals = np.asarray(fn(t, x), dtype=float)
        return cls(disc, np.broadcast_to(vals, (disc.Nt + 1, disc.Nx + 1)).copy())

    def copy(self) -> "Field":
        return Field(self.disc, self.values.copy())

    def __add__(self, other: "Field") -> "Field":
        return Field(self.disc, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.disc, self.values - other.values)

    def scaled(self, a: float) -> "Field":
        return Field(self.disc, a * self.values)

    def to_csv(self) -> str:
        """Serialize as `t,x,value` rows, row-major over (n, i), 17 significant digits."""
        buf = io.StringIO()
        buf.write("t,x,value\n")
        x, t = self.disc.x, self.disc.t
        for n in range(self.disc.Nt + 1):
            row = self.values[n]
            for i in range(self.disc.Nx + 1):
                buf.write(f"{t[n]:.17g},{x[i]:.17g},{row[i]:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, disc: Discretization) -> "Field":
        lines = text.strip().splitlines()
        if lines[0] != "t,x,value":
            raise ValueError("bad field CSV header")
        vals = np.array([float(line.split(",")[2]) for line in lines[1:]])
        return cls(disc, vals.reshape(disc.Nt + 1, disc.Nx + 1))


@dataclasses.dataclass(frozen=True)
class NormTriple:
    """Sup norms of a field and of its first and second space differences.

    Discrete stand-in for the parabolic Holder norm used in the remainder
    estimates; Holder seminorms are deliberately not computed.
    """

    sup_val: float
    sup_dx: float
    sup_dxx: float

    def as_dict(self) -> dict:
        return {"sup_val": self.sup_val, "sup_dx": self.sup_dx, "sup_dxx": self.sup_dxx}


def _check_row(row: np.ndarray, disc: Discretization) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    if row.shape[-1] != disc.Nx + 1:
        raise ShapeError(f"row length {row.shape[-1]} != Nx+1 = {disc.Nx + 1}")
    return row


def trapezoid(row: np.ndarray, disc: Discretization) -> float:
    """Trapezoid rule over [0, L]; operates on the last axis."""
    row = _check_row(row, disc)
    return np.trapezoid(row, dx=disc.dx, axis=-1)


def diff_x(row: np.ndarray, disc: Discretization) -> np.ndarray:
    """Second-order first derivative: centered interior, one-sided ends.

    Accepts a single row or a (..., Nx+1) stack of rows.
    """
    row = _check_row(row, disc)
    out = np.empty_like(row)
    dx = disc.dx
    out[..., 1:-1] = (row[..., 2:] - row[..., :-2]) / (2 * dx)
    out[..., 0] = (-3 * row[..., 0] + 4 * row[..., 1] - row[..., 2]) / (2 * dx)
    out[..., -1] = (3 * row[..., -1] - 4 * row[..., -2] + row[..., -3]) / (2 * dx)
    return out


def discrete_norms(f: Field) -> NormTriple:
    v = f.values
    d1 = diff_x(v, f.disc)
    d2 = diff_x(d1, f.disc)
    return NormTriple(
        float(np.max(np.abs(v))),
        float(np.max(np.abs(d1))),
        float(np.max(np.abs(d2))),
    )
