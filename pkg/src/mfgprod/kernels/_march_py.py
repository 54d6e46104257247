"""Pure numpy/scipy backend for the tridiagonal and Crank-Nicolson kernels.

Selected at import time when the compiled extension is unavailable (or when
MFGPROD_BACKEND=python).  Must stay algorithmically identical to _march_c.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

BACKEND_NAME = "python"

_PIVOT_FLOOR = 1e-14


class SingularSystemError(ValueError):
    """Tridiagonal factorization hit a near-zero pivot."""


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system by the Thomas algorithm with pivot checks."""
    lower = np.asarray(lower, dtype=float)
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = diag.size
    if lower.size != n - 1 or upper.size != n - 1 or rhs.size != n:
        raise ValueError("inconsistent tridiagonal system sizes")
    c = np.empty(n - 1)
    d = np.empty(n)
    piv = diag[0]
    if abs(piv) <= _PIVOT_FLOOR:
        raise SingularSystemError("near-zero pivot at row 0")
    if n > 1:
        c[0] = upper[0] / piv
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i - 1] * c[i - 1]
        if abs(piv) <= _PIVOT_FLOOR:
            raise SingularSystemError(f"near-zero pivot at row {i}")
        if i < n - 1:
            c[i] = upper[i] / piv
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv
    x = np.empty(n)
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _solve_tridiag(lower, diag, upper, rhs):
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    try:
        return solve_banded((1, 1), ab, rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise SingularSystemError(str(exc)) from exc


def _backward_coeffs(b_row, dx, sigma, zeroth, peclet_limit, neumann_right):
    """Spatial-operator coefficients at the solved nodes (i = 1..Nx-1).

    Returns (lo, di, up) such that (L v)_i = lo*v_{i-1} + di*v_i + up*v_{i+1}
    for L v = (sigma^2/2) v_xx + b v_x - zeroth*v.  With a zero-curvature
    right boundary the last solved row reduces to pure one-sided transport
    (its diffusion term vanishes identically under the extrapolation).
    """
    D = 0.5 * sigma**2 / dx**2
    b = b_row[1:-1]
    upwind = np.abs(b) * dx / sigma**2 > peclet_limit
    lo = np.where(upwind, D - np.minimum(b, 0.0) / dx, D - b / (2 * dx))
    up = np.where(upwind, D + np.maximum(b, 0.0) / dx, D + b / (2 * dx))
    di = np.where(upwind, -2 * D - np.abs(b) / dx, -2 * D) - zeroth
    if neumann_right:
        bl = b_row[-2]
        lo[-1] = -bl / dx
        di[-1] = bl / dx - zeroth
        up[-1] = 0.0
    return lo, di, up


def backward_march(
    drift, source, terminal, left, right_kind, right, dx, dt, sigma, zeroth, peclet_limit
):
    """Crank-Nicolson march of v_t + (s^2/2)v_xx + b v_x - zeroth v + source = 0."""
    Nt = drift.shape[0] - 1
    Nx = drift.shape[1] - 1
    neumann = right_kind != 0
    v = np.empty((Nt + 1, Nx + 1))
    v[Nt] = terminal
    v[Nt, 0] = left[Nt]
    if not neumann:
        v[Nt, Nx] = right[Nt]
    h = 0.5 * dt
    for n in range(Nt - 1, -1, -1):
        lo0, di0, up0 = _backward_coeffs(drift[n + 1], dx, sigma, zeroth, peclet_limit, neumann)
        lo1, di1, up1 = _backward_coeffs(drift[n], dx, sigma, zeroth, peclet_limit, neumann)
        vk = v[n + 1]
        expl = lo0 * vk[:-2] + di0 * vk[1:-1] + up0 * vk[2:]
        rhs = vk[1:-1] + h * expl + h * (source[n, 1:-1] + source[n + 1, 1:-1])
        rhs[0] += h * lo1[0] * left[n]
        if not neumann:
            rhs[-1] += h * up1[-1] * right[n]
        sol = _solve_tridiag(-h * lo1[1:], 1.0 - h * di1, -h * up1[:-1], rhs)
        v[n, 1:-1] = sol
        v[n, 0] = left[n]
        v[n, Nx] = right[n] if not neumann else 2 * sol[-1] - sol[-2]
    return v


def _forward_coeffs(b_row, dx, sigma):
    """Coefficients of (L mu)_i = (s^2/2) mu_xx + D_c(b mu) at i = 1..Nx-1.

    Centered conservative form: the flux at face i+1/2 is the average of the
    nodal fluxes, so the drift weight on a neighbor is that neighbor's b.
    """
    D = 0.5 * sigma**2 / dx**2
    lo = D - b_row[:-2] / (2 * dx)
    di = np.full(b_row.size - 2, -2 * D)
    up = D + b_row[2:] / (2 * dx)
    return lo, di, up


def forward_march(drift, source_flux, initial, dx, dt, sigma):
    """Crank-Nicolson march of mu_t = (s^2/2)mu_xx + (b mu)_x + (nu)_x.

    Homogeneous Dirichlet at both ends (absorbing boundary).
    """
    Nt = drift.shape[0] - 1
    Nx = drift.shape[1] - 1
    mu = np.empty((Nt + 1, Nx + 1))
    mu[0] = initial
    mu[0, 0] = 0.0
    mu[0, Nx] = 0.0
    h = 0.5 * dt
    for n in range(Nt):
        lo0, di0, up0 = _forward_coeffs(drift[n], dx, sigma)
        lo1, di1, up1 = _forward_coeffs(drift[n + 1], dx, sigma)
        mk = mu[n]
        expl = lo0 * mk[:-2] + di0 * mk[1:-1] + up0 * mk[2:]
        g0 = (source_flux[n, 2:] - source_flux[n, :-2]) / (2 * dx)
        g1 = (source_flux[n + 1, 2:] - source_flux[n + 1, :-2]) / (2 * dx)
        rhs = mk[1:-1] + h * expl + h * (g0 + g1)
        sol = _solve_tridiag(-h * lo1[1:], 1.0 - h * di1, -h * up1[:-1], rhs)
        mu[n + 1, 1:-1] = sol
        mu[n + 1, 0] = 0.0
        mu[n + 1, Nx] = 0.0
    return mu
