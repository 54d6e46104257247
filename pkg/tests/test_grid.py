"""Grid, quadrature, difference operators and norm proxies."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfgprod import Discretization, Field, diff_x, discrete_norms, trapezoid
from mfgprod.grid import ShapeError

D = Discretization(L=12.0, Nx=240, Nt=240, T=1.0)


def test_grid_nodes():
    assert D.dx == pytest.approx(0.05)
    assert D.dt == pytest.approx(1.0 / 240)
    assert D.x[0] == 0.0 and D.x[-1] == 12.0
    assert D.t[0] == 0.0 and D.t[-1] == 1.0


def test_grid_validation():
    with pytest.raises(ValueError):
        Discretization(L=-1.0, Nx=240, Nt=240, T=1.0)
    with pytest.raises(ValueError):
        Discretization(L=12.0, Nx=4, Nt=240, T=1.0)


def test_trapezoid_constant_row():
    row = np.ones(D.Nx + 1)
    assert trapezoid(row, D) == pytest.approx(12.0)


def test_trapezoid_zero_row():
    assert trapezoid(np.zeros(D.Nx + 1), D) == 0.0


def test_trapezoid_gamma4_tail():
    # closed-form tail mass of x^3 e^{-x}/6 beyond L=12 is
    # e^{-12}(1 + 12 + 72 + 288) ~ 0.00229
    row = D.x**3 * np.exp(-D.x) / 6.0
    assert trapezoid(row, D) == pytest.approx(0.9977, abs=2e-3)


@given(
    a=st.floats(-3, 3),
    b=st.floats(-3, 3),
    seed=st.integers(0, 2**31 - 1),
)
@settings(max_examples=25, deadline=None)
def test_trapezoid_linear_monotone(a, b, seed):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(D.Nx + 1)
    g = rng.standard_normal(D.Nx + 1)
    lin = trapezoid(a * f + b * g, D)
    assert lin == pytest.approx(a * trapezoid(f, D) + b * trapezoid(g, D), abs=1e-10)
    assert trapezoid(np.abs(f), D) >= 0.0


def test_diff_x_exact_on_affine_and_quadratic():
    assert np.allclose(diff_x(D.x, D), 1.0, atol=1e-12)
    assert np.allclose(diff_x(np.full(D.Nx + 1, 3.7), D), 0.0, atol=1e-12)
    assert np.allclose(diff_x(D.x**2, D), 2 * D.x, atol=1e-10)


def test_diff_x_refinement_on_sine():
    errs = []
    for d in (D, D.refine()):
        err = np.max(np.abs(diff_x(np.sin(d.x), d) - np.cos(d.x)))
        errs.append(err)
    assert errs[0] / errs[1] >= 3.5


def test_diff_x_stacked_rows():
    rows = np.stack([D.x, D.x**2])
    out = diff_x(rows, D)
    assert np.allclose(out[0], 1.0)
    assert np.allclose(out[1], 2 * D.x, atol=1e-10)


def test_field_shape_and_finite_checks():
    with pytest.raises(ShapeError):
        Field(D, np.zeros((3, 3)))
    bad = np.zeros((D.Nt + 1, D.Nx + 1))
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        Field(D, bad)


def test_field_csv_roundtrip():
    f = Field.from_function(D, lambda t, x: np.sin(x) * np.exp(-t))
    g = Field.from_csv(f.to_csv(), D)
    assert np.array_equal(f.values, g.values)
    assert f.to_csv().splitlines()[0] == "t,x,value"


def test_field_arithmetic():
    f = Field.from_function(D, lambda t, x: x + t)
    g = Field.from_function(D, lambda t, x: 2 * x)
    assert np.allclose((f + g).values, f.values + g.values)
    assert np.allclose((f - g).values, f.values - g.values)
    assert np.allclose(f.scaled(3.0).values, 3.0 * f.values)


def test_discrete_norms_zero_field():
    n = discrete_norms(Field.zeros(D))
    assert (n.sup_val, n.sup_dx, n.sup_dxx) == (0.0, 0.0, 0.0)


def test_discrete_norms_affine_field():
    n = discrete_norms(Field.from_function(D, lambda t, x: x + 0.0 * t))
    assert n.sup_val == pytest.approx(12.0)
    assert n.sup_dx == pytest.approx(1.0)
    assert n.sup_dxx == pytest.approx(0.0, abs=1e-10)


def test_discrete_norms_gaussian_hump():
    # max of x e^{-x^2} is e^{-1/2}/sqrt(2) ~ 0.4289 at x = 1/sqrt(2)
    n = discrete_norms(Field.from_function(D, lambda t, x: x * np.exp(-(x**2))))
    assert n.sup_val == pytest.approx(0.4289, abs=1e-3)


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=15, deadline=None)
def test_discrete_norms_subadditive(seed):
    d = Discretization(L=4.0, Nx=16, Nt=8, T=1.0)
    rng = np.random.default_rng(seed)
    f = Field(d, rng.standard_normal((d.Nt + 1, d.Nx + 1)))
    g = Field(d, rng.standard_normal((d.Nt + 1, d.Nx + 1)))
    nf, ng, nfg = discrete_norms(f), discrete_norms(g), discrete_norms(f + g)
    assert nfg.sup_val <= nf.sup_val + ng.sup_val + 1e-12
    assert nfg.sup_dx <= nf.sup_dx + ng.sup_dx + 1e-12
    assert nfg.sup_dxx <= nf.sup_dxx + ng.sup_dxx + 1e-12
