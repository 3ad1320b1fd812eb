"""Compare the numba kernels with the numpy fallback.

Each backend runs in a fresh interpreter because CONFLAB_BACKEND is read at
import time. The numba column excludes compilation (one warm-up call).

    python benchmarks/bench_kernels.py [--spacing 0.04] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from conflab import _accel
from conflab.cat0 import cat0_scan
from conflab.harmonic import solve_dirichlet
from conflab.models import ModelSpec, generate
from conflab.targets import TargetSpace

h, repeat = float(sys.argv[1]), int(sys.argv[2])
X = generate(ModelSpec("flat-disc", spacing=h))
H = TargetSpace.hyperbolic()
b = 0.6 * X.coords[X.boundary]

def fresh(fn):
    def run():
        X._apsp = None  # drop the cached distance matrix
        return fn()
    return run

def apsp():
    return X.rows(np.arange(0, X.n, max(1, X.n // 200)))

cases = {
    "shortest-path rows (200 sources)": fresh(apsp),
    "cat0 scan incl. all pairs (200 tri.)": fresh(lambda: cat0_scan(X, 200, 5, seed=0)),
    "dirichlet sweeps (hyperbolic, 200)": lambda: solve_dirichlet(X, H, b, tol=0.0, max_sweeps=200,
                                                                   raise_on_cap=False),
}
out = {}
for name, fn in cases.items():
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
json.dump({"backend": "numba" if _accel.USE_NUMBA else "numpy", "vertices": X.n, "times": out}, sys.stdout)
"""


def run(backend, spacing, repeat):
    env = dict(os.environ, CONFLAB_BACKEND=backend)
    r = subprocess.run([sys.executable, "-c", WORKER, str(spacing), str(repeat)], env=env,
                       capture_output=True, text=True, check=True)
    return json.loads(r.stdout)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--spacing", type=float, default=0.08)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    fast = run("numba", args.spacing, args.repeat)
    slow = run("numpy", args.spacing, args.repeat)
    print(f"flat disc h={args.spacing}, {fast['vertices']} vertices, best of {args.repeat}")
    print(f"{'kernel':38s} {'numba s':>10s} {'numpy s':>10s} {'speed-up':>9s}")
    for name, t in fast["times"].items():
        u = slow["times"][name]
        print(f"{name:38s} {t:10.4f} {u:10.4f} {u / t:9.1f}x")


if __name__ == "__main__":
    main()
