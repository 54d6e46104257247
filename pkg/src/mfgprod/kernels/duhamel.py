"""Heat-kernel Duhamel oracle for the forward transport-diffusion solve.

Evaluates the integral representation of the half-line problem (odd
reflection kernel for the initial layer, kernel-gradient convolution for the
drift and flux-source layer) by trapezoid quadrature in space and midpoint
sampling in time.  Cost is quadratic in the node count per step, so this is
a verification tool for coarse grids only.  The right truncation boundary is
ignored: the formula is the whole half-line one, and comparisons are valid
only while the solution support stays away from x = L.
"""

from __future__ import annotations

import numpy as np

from ..grid import Discretization, Field


def heat_kernel(x, t, sigma):
    """Gaussian kernel with variance sigma^2 t; unit mass over the line."""
    x = np.asarray(x, dtype=float)
    return np.exp(-(x**2) / (2 * sigma**2 * t)) / np.sqrt(2 * sigma**2 * np.pi * t)


def heat_kernel_dx(x, t, sigma):
    x = np.asarray(x, dtype=float)
    return -x / (sigma**2 * t) * heat_kernel(x, t, sigma)


def duhamel_propagate(
    drift: Field, source: Field, initial, disc: Discretization, sigma: float
) -> Field:
    """Propagate mu_t = (s^2/2)mu_xx + (b mu)_x + nu_x from `initial`.

    One predictor-corrector step per time level: the time-layer integrand
    (b mu + nu) is sampled at the interval midpoint, with mu there taken from
    an explicit predictor pass.
    """
    x = disc.x
    dt = disc.dt
    dx = disc.dx
    # quadrature weights: trapezoid in y over [0, L]
    wts = np.full(disc.Nx + 1, dx)
    wts[0] = wts[-1] = 0.5 * dx
    diff = x[:, None] - x[None, :]
    summ = x[:, None] + x[None, :]
    # full-step image kernel and half-step image gradient kernel
    K0 = (heat_kernel(diff, dt, sigma) - heat_kernel(summ, dt, sigma)) * wts
    K1 = (heat_kernel_dx(diff, 0.5 * dt, sigma) + heat_kernel_dx(summ, 0.5 * dt, sigma)) * wts

    out = np.empty((disc.Nt + 1, disc.Nx + 1))
    out[0] = np.asarray(initial, dtype=float)
    for n in range(disc.Nt):
        mu_n = out[n]
        h_n = drift.values[n] * mu_n + source.values[n]
        pred = K0 @ mu_n + dt * (K1 @ h_n)
        b_mid = 0.5 * (drift.values[n] + drift.values[n + 1])
        nu_mid = 0.5 * (source.values[n] + source.values[n + 1])
        h_mid = b_mid * 0.5 * (mu_n + pred) + nu_mid
        out[n + 1] = K0 @ mu_n + dt * (K1 @ h_mid)
    return Field(disc, out)
