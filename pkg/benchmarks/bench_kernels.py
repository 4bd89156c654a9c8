"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]

Each kernel is run on identical inputs under both backends; the outputs
are compared bitwise before any timing is reported.
"""

import argparse
import time

import numpy as np

from projsa import _backend
from projsa.engine import run
from projsa.problems import make_composite, make_quadratic
from projsa.prox import Penalty
from projsa.schedules import GaussianIID, NoiseModel, Polynomial


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def cases(steps):
    rng = np.random.default_rng(0)
    quad = make_quadratic(5, (0.0, 1.0), [2.0, 0.4, 0.5, -1.0, 0.8], 1.0)
    scad = make_composite(1, (-10.0, 10.0), 2.0, 1.0, Penalty.scad(1.0, 3.7))
    noise = NoiseModel(GaussianIID(0.5))
    F = np.cumsum(rng.normal(size=(steps, 2)), axis=0)
    ends = np.minimum(np.arange(steps) + 50, steps - 1)
    tau = np.cumsum(rng.uniform(0.5, 1.5, steps))
    return {
        "sa_loop rm 5-D": lambda b: run(quad, "rm", Polynomial(1.0, 0.8), noise, steps, seed=0, backend=b).x,
        "sa_loop prox2 SCAD": lambda b: run(scad, "prox2", Polynomial(1.0, 1.0), noise, steps, seed=0, backend=b).x,
        "window_sup": lambda b: _backend.window_sup(F, ends, backend=b),
        "lipschitz_max": lambda b: _backend.lipschitz_max(F, tau, 5.0, 12.0, backend=b),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "compiled" not in _backend.available():
        raise SystemExit("compiled extension is not built; run `pip install -e . --no-build-isolation`")
    print(f"{'kernel':22s} {'compiled':>11s} {'python':>11s} {'speedup':>9s}  identical")
    for name, fn in cases(args.steps).items():
        tc, oc = best_of(lambda: fn("compiled"), args.repeat)
        tp, op = best_of(lambda: fn("python"), max(1, args.repeat // 3))
        same = np.array_equal(np.asarray(oc).view(np.uint64), np.asarray(op).view(np.uint64))
        print(f"{name:22s} {tc * 1e3:9.2f}ms {tp * 1e3:9.1f}ms {tp / tc:8.1f}x  {same}")


if __name__ == "__main__":
    main()
