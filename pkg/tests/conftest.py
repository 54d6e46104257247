"""Shared fixtures.

The expensive artifacts (full nonlinear solves on the default 240x240 grid,
the Taylor table) are session-scoped and shared between the unit tests and
the acceptance suite, so the whole run stays well inside the acceptance
runtime budget.
"""

import pytest

from mfgprod import Discretization, ModelParams, SolveOptions, build_table, solve_mfg
from mfgprod.model import FunctionSpec, TimeProfile


def default_params(epsilon=0.05):
    return ModelParams(
        sigma=1.0,
        r=0.3,
        T=1.0,
        epsilon=epsilon,
        xi=TimeProfile("linear_decay"),
        M=FunctionSpec("gamma4_density", (1.0,)),
        uT=FunctionSpec("smooth_terminal", (1.0,)),
    )


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def disc():
    return Discretization(L=12.0, Nx=240, Nt=240, T=1.0)


@pytest.fixture(scope="session")
def coarse_disc():
    return Discretization(L=12.0, Nx=60, Nt=60, T=1.0)


@pytest.fixture(scope="session")
def opts():
    return SolveOptions(tol=1e-8, max_iter=200, damping=0.5)


@pytest.fixture(scope="session")
def solves(params, disc, opts):
    """Cache of full nonlinear solves keyed by epsilon, shared across tests."""
    cache = {}

    def get(eps):
        if eps not in cache:
            cache[eps] = solve_mfg(params.with_epsilon(eps), disc, opts)
        return cache[eps]

    return get


@pytest.fixture(scope="session")
def base_solution(solves):
    return solves(0.05)


@pytest.fixture(scope="session")
def taylor_table(params, disc, opts):
    return build_table(params, disc, opts, 3)
