"""Coupled nonlinear solve and the abstract linearized system."""

import numpy as np
import pytest

from mfgprod import (
    Discretization,
    Field,
    SolveOptions,
    solve_linearized,
    solve_mfg,
    trapezoid,
)
from mfgprod.mfg_solver import DivergenceError
from mfgprod.model import FunctionSpec

from conftest import default_params


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(tol=0.0)
    with pytest.raises(ValueError):
        SolveOptions(damping=1.5)
    with pytest.raises(ValueError):
        SolveOptions(max_iter=0)


def test_default_solve_converges(base_solution, opts):
    assert base_solution.residual <= opts.tol
    assert base_solution.iterations <= 60


def test_solution_invariants(base_solution, disc):
    m = base_solution.m.values
    assert np.min(m) >= -1e-10
    mass = trapezoid(m, disc)
    assert np.max(mass) <= 1 + 1e-8
    assert np.max(np.diff(mass)) <= 1e-8
    assert np.all(base_solution.u.values[:, 0] == 0.0)
    assert np.all(m[:, 0] == 0.0)


def test_eta_consistency(base_solution, disc):
    from mfgprod import diff_x

    eta = trapezoid(diff_x(base_solution.u.values, disc) * base_solution.m.values, disc)
    assert np.max(np.abs(eta - base_solution.eta)) <= 1e-10


def test_zero_initial_mass(coarse_disc, opts):
    p = default_params().__class__(
        **{**default_params().__dict__, "M": FunctionSpec("zero")}
    )
    # the zero density propagates; u solves the standalone value equation
    sol = solve_mfg(p, coarse_disc, opts)
    assert np.all(sol.m.values == 0.0)
    assert np.all(sol.eta == 0.0)


def test_zero_profile_kills_epsilon_dependence(coarse_disc, opts):
    from mfgprod.model import TimeProfile

    base = default_params()
    p0 = base.__class__(**{**base.__dict__, "xi": TimeProfile("constant_zero")})
    s_a = solve_mfg(p0.with_epsilon(0.0), coarse_disc, opts)
    s_b = solve_mfg(p0.with_epsilon(0.1), coarse_disc, opts)
    d = max(
        np.max(np.abs(s_a.u.values - s_b.u.values)),
        np.max(np.abs(s_a.m.values - s_b.m.values)),
    )
    assert d <= 10 * opts.tol


def test_divergence_reports_history(coarse_disc):
    p = default_params()
    tight = SolveOptions(tol=1e-8, max_iter=2, damping=0.5)
    with pytest.raises(DivergenceError) as err:
        solve_mfg(p, coarse_disc, tight)
    assert len(err.value.residual_history) == 2


# -- linearized system ----------------------------------------------------

def test_linearized_zero_sources_zero_solution(base_solution, params, disc, opts):
    zero = Field.zeros(disc)
    lin = solve_linearized(base_solution, zero, zero, params.epsilon, params, disc, opts)
    assert np.max(np.abs(lin.w.values)) <= opts.tol
    assert np.max(np.abs(lin.mu.values)) <= opts.tol


def test_linearized_boundary_and_terminal_rows(base_solution, params, disc, opts):
    Psi = Field.from_function(disc, lambda t, x: np.sin(x) * np.exp(-0.3 * x) + 0.0 * t)
    Phi = Field.from_function(disc, lambda t, x: np.exp(-((x - 3.0) ** 2)) * (1 - t))
    lin = solve_linearized(base_solution, Psi, Phi, params.epsilon, params, disc, opts)
    assert np.all(lin.w.values[:, 0] == 0.0)
    assert np.all(lin.mu.values[:, 0] == 0.0)
    assert np.all(lin.w.values[-1] == 0.0)  # terminal condition w(., T) = 0
    assert np.all(lin.mu.values[0] == 0.0)  # initial condition mu(., 0) = 0
    assert lin.residual <= opts.tol


def test_linearized_single_pass_at_epsilon_zero(params, disc, opts, solves):
    base0 = solves(0.0)
    Psi = Field.from_function(disc, lambda t, x: x * np.exp(-x) + 0.0 * t)
    Phi = Field.zeros(disc)
    lin = solve_linearized(base0, Psi, Phi, 0.0, params, disc, opts)
    assert lin.iterations == 1
    assert np.all(lin.G == 0.0)


def test_linearized_is_linear_in_sources(base_solution, params, disc, opts):
    Psi = Field.from_function(disc, lambda t, x: np.exp(-x) * (1 + t))
    Phi = Field.from_function(disc, lambda t, x: np.exp(-((x - 2.0) ** 2)) + 0.0 * t)
    lin1 = solve_linearized(base_solution, Psi, Phi, params.epsilon, params, disc, opts)
    lin2 = solve_linearized(
        base_solution, Psi.scaled(2.0), Phi.scaled(2.0), params.epsilon, params, disc, opts
    )
    # the fixed point is linear in (Psi, Phi); Picard tolerance limits agreement
    assert np.max(np.abs(lin2.w.values - 2 * lin1.w.values)) <= 100 * opts.tol
    assert np.max(np.abs(lin2.mu.values - 2 * lin1.mu.values)) <= 100 * opts.tol
