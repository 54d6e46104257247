"""Sensitivity verification harness.

Finite-difference derivative oracles in the competition parameter, the
Taylor-remainder order study (the central experiment: the order-k remainder
should shrink like eps^{k+1}), and the explicit smallness threshold below
which the linear theory guarantees solvability.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .cascade import TaylorTable, build_table, taylor_eval
from .grid import Discretization, Field, discrete_norms
from .mfg_solver import MFGSolution, SolveOptions, solve_mfg
from .model import ModelParams

NORM_NAMES = ("sup_val", "sup_dx", "sup_dxx")
DEFAULT_DELTA = 0.02
_LOG_LINEAR_CUTOFF = -30.0


@dataclasses.dataclass
class SensitivityReport:
    epsilons: list
    orders: list
    errors: dict  # (k, epsilon, norm_name) -> float
    slopes: dict  # (k, norm_name) -> float
    log_epsilon0: float
    runtime_seconds: float | None = None
    complete: bool = True

    def to_json(self, include_runtime: bool = False) -> str:
        """Canonical JSON.  Runtime is excluded by default so that repeated
        runs of the same configuration are byte-identical."""
        doc = {
            "schema_version": 1,
            "epsilons": list(self.epsilons),
            "orders": list(self.orders),
            "errors": [
                {"k": k, "epsilon": e, "norm": n, "error": v}
                for (k, e, n), v in sorted(self.errors.items())
            ],
            "slopes": [
                {"k": k, "norm": n, "slope": v}
                for (k, n), v in sorted(self.slopes.items())
            ],
            "log_epsilon0": self.log_epsilon0,
            "runtime_seconds": self.runtime_seconds if include_runtime else None,
            "complete": self.complete,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SensitivityReport":
        doc = json.loads(text)
        return cls(
            epsilons=doc["epsilons"],
            orders=doc["orders"],
            errors={(r["k"], r["epsilon"], r["norm"]): r["error"] for r in doc["errors"]},
            slopes={(r["k"], r["norm"]): r["slope"] for r in doc["slopes"]},
            log_epsilon0=doc["log_epsilon0"],
            runtime_seconds=doc.get("runtime_seconds"),
            complete=doc.get("complete", True),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k,epsilon,norm,error\n")
        for (k, e, n), v in sorted(self.errors.items()):
            buf.write(f"{k},{e:.17g},{n},{v:.17g}\n")
        return buf.getvalue()


def one_sided_derivative(values, k: int, delta: float) -> float | np.ndarray:
    """Second-order one-sided stencils on samples f(0), f(d), f(2d), ...

    k = 1 needs 3 samples, k = 2 needs 4.
    """
    if k == 1:
        f0, f1, f2 = values[:3]
        return (-3 * f0 + 4 * f1 - f2) / (2 * delta)
    if k == 2:
        f0, f1, f2, f3 = values[:4]
        return (2 * f0 - 5 * f1 + 4 * f2 - f3) / delta**2
    raise ValueError("one-sided oracle supports k in {1, 2}")


def fd_derivative_oracle(
    params: ModelParams,
    disc: Discretization,
    opts: SolveOptions,
    k: int,
    delta: float = DEFAULT_DELTA,
    solves: dict | None = None,
):
    """k-th derivative of the full solution in the competition parameter at 0,
    by one-sided stencils on full nonlinear solves at 0, delta, 2*delta, ...

    `solves` is an optional cache mapping epsilon to an MFGSolution, shared
    across calls so the expensive full solves are not repeated.
    """
    if k not in (1, 2):
        raise ValueError("derivative oracle supports k in {1, 2}")
    solves = solves if solves is not None else {}
    eps_list = [j * delta for j in range(k + 2)]
    for eps in eps_list:
        if eps not in solves:
            solves[eps] = solve_mfg(params.with_epsilon(eps), disc, opts)
    u_samples = [solves[e].u.values for e in eps_list]
    m_samples = [solves[e].m.values for e in eps_list]
    u_fd = one_sided_derivative(u_samples, k, delta)
    m_fd = one_sided_derivative(m_samples, k, delta)
    return Field(disc, u_fd), Field(disc, m_fd)


def _fit_slope(eps, errs):
    le = np.log(np.asarray(eps))
    lv = np.log(np.asarray(errs))
    return float(np.polyfit(le, lv, 1)[0])


def remainder_study(
    params: ModelParams,
    disc: Discretization,
    opts: SolveOptions,
    epsilons,
    K: int,
    table: TaylorTable | None = None,
    solves: dict | None = None,
    threads: int = 1,
    error_floor: float = 0.0,
) -> SensitivityReport:
    """Measure Taylor remainders of the full solution against cascade partial
    sums and fit log-log slopes per order and norm.

    Per-epsilon solves are independent; with threads > 1 they run concurrently
    and are merged keyed by epsilon, so the report is deterministic.  Errors
    at or below `error_floor` (a caller-estimated discretization floor) are
    kept in the table but excluded from the slope fits, as is epsilon = 0.
    """
    t0 = time.perf_counter()
    epsilons = sorted(float(e) for e in epsilons)
    if any(e < 0 for e in epsilons):
        raise ValueError("epsilons must be nonnegative")
    if table is None:
        table = build_table(params, disc, opts, K)
    if K > table.K:
        raise ValueError(f"K = {K} exceeds table order {table.K}")
    solves = solves if solves is not None else {}
    complete = True

    def get_solution(eps):
        if eps == 0.0:
            u0, m0 = table.pairs[0]
            return MFGSolution(u0, m0, table.F0, np.zeros(disc.Nt + 1), 0, 0.0)
        if eps not in solves:
            solves[eps] = solve_mfg(params.with_epsilon(eps), disc, opts)
        return solves[eps]

    todo = [e for e in epsilons if e != 0.0 and e not in solves]
    if threads > 1 and todo:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for eps, sol in zip(todo, pool.map(
                lambda e: solve_mfg(params.with_epsilon(e), disc, opts), todo
            )):
                solves[eps] = sol

    errors = {}
    for eps in epsilons:
        try:
            sol = get_solution(eps)
        except Exception:
            complete = False
            continue
        for k in range(K + 1):
            u_approx, m_approx = taylor_eval(table, eps, k)
            nu = discrete_norms(sol.u - u_approx)
            nm = discrete_norms(sol.m - m_approx)
            for name, val in zip(NORM_NAMES, (nu.sup_val, nu.sup_dx, nu.sup_dxx)):
                errors[(k, eps, "u_" + name)] = val
            for name, val in zip(NORM_NAMES, (nm.sup_val, nm.sup_dx, nm.sup_dxx)):
                errors[(k, eps, "m_" + name)] = val

    slopes = {}
    for k in range(K + 1):
        for field in ("u", "m"):
            for name in NORM_NAMES:
                key = field + "_" + name
                pts = [
                    (e, errors[(k, e, key)])
                    for e in epsilons
                    if e > 0 and (k, e, key) in errors
                    and errors[(k, e, key)] > error_floor
                ]
                if len(pts) >= 3:
                    slopes[(k, key)] = _fit_slope(*zip(*pts))

    u0, _ = table.pairs[0]
    log_e0 = estimate_log_epsilon0(u0, table.F0, params, disc)
    return SensitivityReport(
        epsilons=epsilons,
        orders=list(range(K + 1)),
        errors=errors,
        slopes=slopes,
        log_epsilon0=log_e0,
        runtime_seconds=time.perf_counter() - t0,
        complete=complete,
    )


def log_epsilon0_from_norms(grad_sup: float, F_sup: float, sigma: float, T: float) -> float:
    """Natural log of the explicit smallness threshold, computed in log space.

    The bound B on the coupling weight is min of 1/10 and an expression with
    an exp(2*C0*T) factor that underflows any linear-space evaluation for
    realistic C0; the threshold itself inverts beta, eps0 = 2B/(1-B).
    """
    c = 4.0 / math.sqrt(2.0 * math.pi * sigma**2)
    C0 = 384.0 * c * math.log(2.0) * (1.0 + grad_sup**2) ** 3
    denom = F_sup**2 + 0.75 * grad_sup**2
    if denom == 0.0:
        log_B = math.log(0.1)
    else:
        log_B1 = math.log1p(3.0 * grad_sup**2) - (
            math.log(96.0) + 2.0 * C0 * T + math.log(denom)
        )
        log_B = min(log_B1, math.log(0.1))
    if log_B > _LOG_LINEAR_CUTOFF:
        return math.log(2.0) + log_B - math.log1p(-math.exp(log_B))
    return math.log(2.0) + log_B


def estimate_log_epsilon0(
    u0: Field, F0: Field, params: ModelParams, disc: Discretization
) -> float:
    """Threshold estimate from the base solution's gradient and rate bounds."""
    grad_sup = discrete_norms(u0).sup_dx
    F_sup = float(np.max(np.abs(F0.values)))
    return log_epsilon0_from_norms(grad_sup, F_sup, params.sigma, params.T)
