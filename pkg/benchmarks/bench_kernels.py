"""Compare the compiled kernels with the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each kernel is run on the same inputs by both backends; the script reports
the best wall time of ``--repeat`` runs, the speedup and the largest
absolute difference between outputs.
"""

import argparse
import time

import numpy as np

from ifit import _fallback

try:
    from ifit import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    n = 5000
    x = rng.random((n, 4))
    t = rng.random((n, 4))
    k = int(np.ceil(np.sqrt(n)))
    yield "knn_tricube (N=5000, p=4)", lambda m: m.knn_tricube(x, t, k)

    grid = np.arange(1, 51) / 50.0
    u = rng.random(200_000)
    yield "gillespie_mm (theta_true)", lambda m: m.gillespie_mm(0.5, 2.5, 1.0, 100, 100, 0, 0, grid, u)[0]

    from ifit.models.trait import integer_weights
    w = integer_weights([0.2, 0.7, 0.1, 0.7])
    cdf = np.cumsum(w)
    traits0 = rng.integers(0, w.size, 500).astype(np.int64)
    steps = rng.random((5000, 3))
    yield "trait_dynamics (5000 steps)", lambda m: m.trait_dynamics(traits0.copy(), w, cdf, 0.2, steps)

    shape = (62, 66)
    d, c, pk = rng.standard_cauchy(shape), rng.random(shape), rng.random(shape)
    yield "toad_paths (66 toads x 63 days)", lambda m: m.toad_paths(d, c, pk, 0.6)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<34} {'cython s':>10} {'python s':>10} {'speedup':>8} {'max |diff|':>11}")
    for name, run in cases(rng):
        tc, oc = best_time(lambda: run(_ckernels), args.repeat)
        tp, op = best_time(lambda: run(_fallback), args.repeat)
        diff = float(np.max(np.abs(np.asarray(oc, dtype=float) - np.asarray(op, dtype=float))))
        print(f"{name:<34} {tc:>10.4f} {tp:>10.4f} {tp / tc:>8.1f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
