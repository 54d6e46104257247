"""Compare the compiled and pure-python marching kernels.

Runs the backward and forward solvers on identical inputs through both
backends and reports wall time per solve plus the sup distance between the
outputs (which should be ~1e-15: same arithmetic, different loop engine).

Usage: python benchmarks/bench_kernels.py [--sizes 120,240,480] [--repeat 5]
"""

import argparse
import time

import numpy as np

from mfgprod.grid import Discretization
from mfgprod.kernels import _march_py

try:
    from mfgprod.kernels import _march_c
except ImportError:
    _march_c = None


def problem(disc, seed=0):
    rng = np.random.default_rng(seed)
    shape = (disc.Nt + 1, disc.Nx + 1)
    drift = rng.uniform(-1, 1, shape)
    source = rng.uniform(-1, 1, shape)
    terminal = rng.standard_normal(disc.Nx + 1)
    terminal[0] = 0.0
    initial = np.abs(rng.standard_normal(disc.Nx + 1))
    initial[0] = initial[-1] = 0.0
    left = np.zeros(disc.Nt + 1)
    return drift, source, terminal, initial, left


def run_backend(mod, disc, data, repeat):
    drift, source, terminal, initial, left = data
    best_b = best_f = float("inf")
    out_b = out_f = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out_b = mod.backward_march(
            drift, source, terminal, left, 1, left, disc.dx, disc.dt, 1.0, 0.3, 2.0
        )
        best_b = min(best_b, time.perf_counter() - t0)
        t0 = time.perf_counter()
        out_f = mod.forward_march(drift, source, initial, disc.dx, disc.dt, 1.0)
        best_f = min(best_f, time.perf_counter() - t0)
    return best_b, best_f, out_b, out_f


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="120,240,480")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if _march_c is None:
        print("compiled backend not available; showing python timings only")
    header = f"{'N':>6} {'python bwd':>12} {'python fwd':>12}"
    if _march_c is not None:
        header += f" {'compiled bwd':>13} {'compiled fwd':>13} {'speedup':>8} {'sup diff':>10}"
    print(header)

    for N in sizes:
        disc = Discretization(L=12.0, Nx=N, Nt=N, T=1.0)
        data = problem(disc)
        tb_py, tf_py, ub_py, uf_py = run_backend(_march_py, disc, data, args.repeat)
        line = f"{N:>6} {tb_py * 1e3:>10.2f}ms {tf_py * 1e3:>10.2f}ms"
        if _march_c is not None:
            tb_c, tf_c, ub_c, uf_c = run_backend(_march_c, disc, data, args.repeat)
            diff = max(np.max(np.abs(ub_py - ub_c)), np.max(np.abs(uf_py - uf_c)))
            speedup = (tb_py + tf_py) / (tb_c + tf_c)
            line += f" {tb_c * 1e3:>11.2f}ms {tf_c * 1e3:>11.2f}ms {speedup:>7.1f}x {diff:>10.1e}"
        print(line)


if __name__ == "__main__":
    main()
