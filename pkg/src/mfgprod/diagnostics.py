"""Exact-identity and monitored-quantity checks.

These realize, as numerical residuals and logged series, the identities
behind the a priori estimates for the linear forward-backward system: the
discounted duality identity, density mass / first moment / L1 series, and
the discounted energy of the backward unknown weighted by the base density.
Inequality constants are never asserted; only exact identities and
finiteness are.
"""

from __future__ import annotations

import dataclasses
import io

import numpy as np

from .grid import Discretization, Field, ShapeError, diff_x, trapezoid
from .mfg_solver import LinearizedSolution, MFGSolution, _weights_series
from .model import ModelParams


@dataclasses.dataclass
class DiagnosticSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    metadata: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("diagnostic series contains non-finite values")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("name,t,value\n")
        for t, v in zip(self.times, self.values):
            buf.write(f"{self.name},{t:.17g},{v:.17g}\n")
        return buf.getvalue()


def duality_residual(
    base: MFGSolution,
    lin: LinearizedSolution,
    Psi: Field,
    Phi: Field,
    params: ModelParams,
    disc: Discretization,
) -> DiagnosticSeries:
    """Residual of the discounted duality identity at interior time nodes.

    The identity (exact in the continuum, and the seed of the energy
    estimates) reads

        d/dt int e^{-rt} w mu dx
          = -e^{-rt} int (F0 G mu + Psi mu + Phi w_x
                          + w_x (G - w_x) m0 / 2) dx  +  BT(t),

    with G the scalar coupling series; the transport contributions of the two
    equations cancel exactly under integration by parts.  On the truncated
    domain [0, L] the integration by parts leaves the flux

        BT = e^{-rt} [ (sigma^2/2)(w mu_x - w_x mu)
                       + w (F0 mu + Phi + (G - w_x) m0 / 2) ]  at x = L

    (every boundary contribution at x = 0 vanishes because w and mu do);
    it is kept so the identity is exact and the residual is pure
    discretization error.  Time derivative by centered differences, all space
    integrals by trapezoid.
    """
    for f in (base.u, lin.w, Psi, Phi):
        if f.disc != disc:
            raise ShapeError("all fields must share the discretization")
    t = disc.t
    r = params.r
    w = lin.w.values
    mu = lin.mu.values
    m0 = base.m.values
    F0 = base.F.values
    u0x = diff_x(base.u.values, disc)
    wx = diff_x(w, disc)
    _, beta = _weights_series(params, disc, params.epsilon)
    G = beta * trapezoid(u0x * mu + m0 * wx, disc)

    disc_fac = np.exp(-r * t)
    pairing = disc_fac * trapezoid(w * mu, disc)
    dpair = (pairing[2:] - pairing[:-2]) / (2 * disc.dt)
    integrand = disc_fac * trapezoid(
        F0 * G[:, None] * mu
        + Psi.values * mu
        + Phi.values * wx
        + 0.5 * wx * (G[:, None] - wx) * m0,
        disc,
    )
    mux = diff_x(mu, disc)
    nu = Phi.values + 0.5 * (G[:, None] - wx) * m0
    boundary = disc_fac * (
        0.5 * params.sigma**2 * (w[:, -1] * mux[:, -1] - wx[:, -1] * mu[:, -1])
        + w[:, -1] * (F0[:, -1] * mu[:, -1] + nu[:, -1])
    )
    residual = dpair + integrand[1:-1] - boundary[1:-1]
    return DiagnosticSeries("duality_residual", t[1:-1], residual)


def mass_and_moment(m_or_mu: Field, disc: Discretization):
    """Mass, absolute first moment and L1 series of a density-like field."""
    v = m_or_mu.values
    x = disc.x
    mass = trapezoid(v, disc)
    moment = trapezoid(x[None, :] * np.abs(v), disc)
    l1 = trapezoid(np.abs(v), disc)
    t = disc.t
    return (
        DiagnosticSeries("mass", t, mass),
        DiagnosticSeries("moment", t, moment),
        DiagnosticSeries("l1", t, l1),
    )


def energy_series(
    w: Field, m0: Field, params: ModelParams, disc: Discretization
) -> DiagnosticSeries:
    """Discounted energy e^{-rt} int w_x^2 m0 dx per time node.

    The time integral (trapezoid over [0, T]) rides along in the metadata.
    """
    wx = diff_x(w.values, disc)
    vals = np.exp(-params.r * disc.t) * trapezoid(wx**2 * m0.values, disc)
    total = float(np.trapezoid(vals, dx=disc.dt))
    return DiagnosticSeries("energy", disc.t, vals, {"time_integral": total})
