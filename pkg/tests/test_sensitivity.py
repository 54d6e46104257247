"""Sensitivity harness: stencil oracles, remainder study, smallness threshold."""

import dataclasses
import math

import numpy as np
import pytest

from mfgprod import Discretization, remainder_study
from mfgprod.sensitivity import (
    DEFAULT_DELTA,
    SensitivityReport,
    fd_derivative_oracle,
    log_epsilon0_from_norms,
    one_sided_derivative,
    remainder_study,
)
from mfgprod.model import TimeProfile

from conftest import default_params


# -- stencils -------------------------------------------------------------

def test_one_sided_stencils_on_polynomials():
    d = 0.01
    # exact on cubics (k=1) and on the quadratic part (k=2)
    f = lambda e: 2.0 + 3.0 * e + 0.5 * e**2
    vals = [f(j * d) for j in range(4)]
    assert one_sided_derivative(vals, 1, d) == pytest.approx(3.0, abs=1e-10)
    assert one_sided_derivative(vals, 2, d) == pytest.approx(1.0, abs=1e-8)


def test_one_sided_stencil_on_beta():
    # beta'(0) = 1/2 from the closed form eps/(2+eps)
    d = 1e-3
    vals = [j * d / (2 + j * d) for j in range(3)]
    assert one_sided_derivative(vals, 1, d) == pytest.approx(0.5, abs=1e-5)


def test_one_sided_stencil_order_check():
    with pytest.raises(ValueError):
        one_sided_derivative([1.0, 2.0, 3.0, 4.0, 5.0], 3, 0.1)


# -- finite-difference derivative oracle ---------------------------------

def test_fd_oracle_matches_cascade_order1(params, disc, opts, taylor_table, solves):
    cache = {0.0: solves(0.0)}
    u_fd, m_fd = fd_derivative_oracle(params, disc, opts, 1, DEFAULT_DELTA, cache)
    u_1, m_1 = taylor_table.pairs[1]
    for got, ref in ((u_fd, u_1), (m_fd, m_1)):
        scale = max(np.max(np.abs(ref.values)), 1e-8)
        assert np.max(np.abs(got.values - ref.values)) / scale <= 0.05


def test_fd_oracle_zero_profile(coarse_disc, opts):
    p = dataclasses.replace(default_params(), xi=TimeProfile("constant_zero"))
    for k in (1, 2):
        u_fd, m_fd = fd_derivative_oracle(p, coarse_disc, opts, k, DEFAULT_DELTA)
        assert np.max(np.abs(u_fd.values)) <= 1e-6
        assert np.max(np.abs(m_fd.values)) <= 1e-6


def test_fd_oracle_halving_delta_refines(params, coarse_disc, opts):
    cache = {}
    u_a, _ = fd_derivative_oracle(params, coarse_disc, opts, 1, 0.04, cache)
    u_b, _ = fd_derivative_oracle(params, coarse_disc, opts, 1, 0.02, cache)
    u_c, _ = fd_derivative_oracle(params, coarse_disc, opts, 1, 0.01, cache)
    d_ab = np.max(np.abs(u_a.values - u_b.values))
    d_bc = np.max(np.abs(u_b.values - u_c.values))
    assert d_ab / d_bc >= 3.0


def test_fd_oracle_order_validation(params, coarse_disc, opts):
    with pytest.raises(ValueError):
        fd_derivative_oracle(params, coarse_disc, opts, 3)


# -- remainder study ------------------------------------------------------

@pytest.fixture(scope="module")
def study(params, disc, opts, taylor_table, solves):
    cache = {e: solves(e) for e in (0.02, 0.04, 0.08)}
    return remainder_study(
        params, disc, opts, [0.0, 0.02, 0.04, 0.08], 3, table=taylor_table, solves=cache
    )


def test_study_zero_epsilon_remainder_exact(study):
    for k in study.orders:
        assert study.errors[(k, 0.0, "u_sup_val")] == 0.0
        assert study.errors[(k, 0.0, "m_sup_val")] == 0.0


def test_study_slope_bands(study):
    assert 0.6 <= study.slopes[(0, "u_sup_val")] <= 1.4
    assert 1.6 <= study.slopes[(1, "u_sup_val")] <= 2.4
    assert 2.4 <= study.slopes[(2, "u_sup_val")] <= 3.4


def test_study_errors_monotone_in_order(study):
    for eps in (0.02, 0.04):
        for k in range(3):
            assert (
                study.errors[(k + 1, eps, "u_sup_val")]
                <= study.errors[(k, eps, "u_sup_val")]
            )


def test_study_every_norm_present(study):
    for k in study.orders:
        for eps in study.epsilons:
            for f in ("u", "m"):
                for n in ("sup_val", "sup_dx", "sup_dxx"):
                    assert (k, eps, f"{f}_{n}") in study.errors


def test_report_roundtrip_and_csv(study):
    text = study.to_json()
    back = SensitivityReport.from_json(text)
    assert back.errors == study.errors
    assert back.slopes == study.slopes
    assert back.to_json() == text  # byte-identical reserialization
    lines = study.to_csv().splitlines()
    assert lines[0] == "k,epsilon,norm,error"
    assert len(lines) == 1 + len(study.errors)


def test_study_threaded_is_deterministic(params, disc, opts, taylor_table):
    eps = [0.02, 0.04, 0.08]
    r1 = remainder_study(params, disc, opts, eps, 2, table=taylor_table, threads=4)
    r2 = remainder_study(params, disc, opts, eps, 2, table=taylor_table, threads=1)
    assert r1.to_json() == r2.to_json()


def test_study_rejects_negative_epsilon(params, disc, opts, taylor_table):
    with pytest.raises(ValueError):
        remainder_study(params, disc, opts, [-0.1], 1, table=taylor_table)


# -- smallness threshold --------------------------------------------------

def test_epsilon0_cap_branch_exact():
    # with zero norms the 1/10 cap binds and inverting beta gives exactly 2/9
    log_e0 = log_epsilon0_from_norms(0.0, 0.0, 1.0, 1.0)
    assert math.exp(log_e0) == pytest.approx(2.0 / 9.0, abs=1e-15)


def test_epsilon0_log_space_never_overflows():
    # C0*T up to 1e6: the linear-space bound underflows, the log result is finite
    val = log_epsilon0_from_norms(1.0, 1.0, 1.0, 1e6 / (384 * 4 / math.sqrt(2 * math.pi) * math.log(2) * 8))
    assert math.isfinite(val)
    huge = log_epsilon0_from_norms(5.0, 2.0, 0.1, 1e4)
    assert math.isfinite(huge) and huge < -1e5


def test_epsilon0_known_conservative_value():
    # sigma=1, T=1, zero gradient norm but F norm 1: C0 = 384 c ln2 ~ 424.8 and
    # log eps0 ~ log2 + log(1/96) - 2 C0
    c = 4.0 / math.sqrt(2 * math.pi)
    C0 = 384 * c * math.log(2)
    expect = math.log(2) - math.log(96) - 2 * C0
    assert log_epsilon0_from_norms(0.0, 1.0, 1.0, 1.0) == pytest.approx(expect, abs=1e-9)
    assert C0 == pytest.approx(424.8, abs=0.5)


def test_epsilon0_monotonicity_probe():
    grads = (0.2, 0.6, 1.0)
    horizons = (0.5, 1.0, 2.0)
    table = {
        (g, T): log_epsilon0_from_norms(g, 0.5, 1.0, T) for g in grads for T in horizons
    }
    for T in horizons:
        vals = [table[(g, T)] for g in grads]
        assert vals[0] >= vals[1] >= vals[2]
    for g in grads:
        vals = [table[(g, T)] for T in horizons]
        assert vals[0] >= vals[1] >= vals[2]
