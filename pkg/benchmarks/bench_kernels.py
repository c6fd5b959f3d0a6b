"""Time the numba and numpy kernel paths side by side.

    python3 benchmarks/bench_kernels.py [--p 100] [--n 100] [--repeat 5]

Kernel timings use the suffixed functions directly, so one process covers
both backends. The end-to-end MSG fit is timed in two subprocesses with
MSGCOV_BACKEND set, which is how users switch paths.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from msgcov import kernels
from msgcov._accel import HAS_NUMBA
from msgcov.gmodel import SufficientStats, build_support_grid
from msgcov.sim import ModelSpec, make_sigma, sample_mvn

E2E = """
import json, sys, time
from msgcov import BACKEND
from msgcov.gmodel import msg_estimate
from msgcov.sim import ModelSpec, make_sigma, sample_mvn
p, n, repeat = map(int, sys.argv[1:4])
X = sample_mvn(make_sigma(ModelSpec(2, p)), n, seed=1)
msg_estimate(X, K=p)  # warm-up; includes JIT compilation on the numba path
times = []
for _ in range(repeat):
    t0 = time.perf_counter()
    msg_estimate(X, K=p)
    times.append(time.perf_counter() - t0)
json.dump({"backend": BACKEND, "best": min(times)}, sys.stdout)
"""


def best_of(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(p, n):
    X = sample_mvn(make_sigma(ModelSpec(2, p)), n, seed=0)
    stats = SufficientStats.from_data(X)
    grid = build_support_grid(stats.triples(), K=p)
    m = float(stats.dof)
    a, b, g = grid.a.copy(), grid.b.copy(), grid.gamma.copy()
    v11, v12, v22 = stats.v11.copy(), stats.v12.copy(), stats.v22.copy()
    wc, cc = kernels.wishart2_const(stats.dof), kernels.chi2_const(stats.dof)
    L = kernels.pair_loglik_matrix_numpy(v11, v12, v22, m, a, b, g, wc)
    logw = np.log(grid.weights)
    vals = a * b * g
    pts = stats.triples()
    cents = pts[np.random.default_rng(0).choice(len(pts), p, replace=False)]
    return {
        "pair_loglik_matrix": (v11, v12, v22, m, a, b, g, wc),
        "diag_loglik_matrix": (stats.diag, m, a, cc),
        "accumulate_responsibilities": None,
        "mixture_loglik": (L, logw),
        "posterior_mean": (L, logw, vals),
        "nearest_centroid": (pts, cents),
    }, (L, logw)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=100)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAS_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    cases, (L, logw) = kernel_cases(args.p, args.n)
    print(f"p={args.p} n={args.n}: {L.shape[0]} pairs x {L.shape[1]} atoms")
    print(f"{'kernel':<30}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, call_args in cases.items():
        times = []
        for suffix in ("numba", "numpy"):
            fn = getattr(kernels, f"{name}_{suffix}")
            if call_args is None:
                acc = np.zeros(L.shape[1])
                times.append(best_of(lambda: fn(L, logw, acc), args.repeat))
            else:
                times.append(best_of(lambda: fn(*call_args), args.repeat))
        print(f"{name:<30}{1e3 * times[0]:>12.3f}{1e3 * times[1]:>12.3f}{times[1] / times[0]:>10.1f}")

    print("\nend-to-end msg_estimate (best of repeats, after warm-up)")
    for backend in ("numba", "numpy"):
        env = {k: v for k, v in os.environ.items() if not k.startswith("MSGCOV_")}
        env["MSGCOV_BACKEND"] = backend
        out = subprocess.run(
            [sys.executable, "-c", E2E, str(args.p), str(args.n), str(args.repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        res = json.loads(out.stdout)
        print(f"  {res['backend']:<8}{res['best']:.3f}s")


if __name__ == "__main__":
    main()
