"""Compare the numba and pure-numpy builds of the SVM kernels.

Runs each backend in a subprocess (the backend is chosen at import time
via CHAINTRACE_NO_NUMBA) and reports wall time for the RBF Gram matrix
and the dual solver across a few problem sizes.

Usage: python benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from chaintrace import _kernels
from chaintrace.ocsvm import train_ocsvm

sizes = [(200, 10), (500, 10), (1000, 10)]
out = {"backend": "numba" if _kernels.using_numba() else "numpy", "runs": []}

# warm up the jit (compilation time would otherwise dominate)
warm = np.random.default_rng(0).normal(size=(8, 4))
_kernels.rbf_matrix(warm, warm, 0.5)
train_ocsvm(warm, 0.5, 0.5)

for l, d in sizes:
    rng = np.random.default_rng(l)
    X = rng.normal(size=(l, d))

    t0 = time.perf_counter()
    for _ in range(5):
        K = _kernels.rbf_matrix(X, X, 0.1)
    t_rbf = (time.perf_counter() - t0) / 5

    t0 = time.perf_counter()
    alpha, rho, iters = train_ocsvm(X, 0.1, 0.1)
    t_solve = time.perf_counter() - t0

    out["runs"].append({
        "l": l, "d": d, "rbf_seconds": t_rbf,
        "solve_seconds": t_solve, "solver_iterations": iters,
        "objective": 0.5 * float(alpha @ K @ alpha),
    })

print(json.dumps(out))
"""


def run_backend(no_numba: bool) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["CHAINTRACE_NO_NUMBA"] = "1"
    else:
        env.pop("CHAINTRACE_NO_NUMBA", None)
    proc = subprocess.run(
        [sys.executable, "-c", _WORKER], env=env,
        capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    results = [run_backend(no_numba=False), run_backend(no_numba=True)]
    if results[0]["backend"] == results[1]["backend"]:
        print("warning: numba unavailable, both runs used the numpy path")

    header = f"{'backend':>8} {'l':>6} {'rbf (ms)':>10} {'solve (ms)':>11} {'iters':>7}"
    print(header)
    print("-" * len(header))
    for res in results:
        for run in res["runs"]:
            print(f"{res['backend']:>8} {run['l']:>6} "
                  f"{run['rbf_seconds'] * 1e3:>10.2f} "
                  f"{run['solve_seconds'] * 1e3:>11.2f} "
                  f"{run['solver_iterations']:>7}")

    # both backends must land on the same optimum
    for a, b in zip(results[0]["runs"], results[1]["runs"]):
        drift = abs(a["objective"] - b["objective"])
        assert drift <= 1e-9, f"objective drift {drift} at l={a['l']}"
    print("objectives agree across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
