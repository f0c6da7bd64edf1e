"""Time the compiled kernels against the numpy fallback on identical inputs.

    python benchmarks/bench_kernels.py [--paths 20000] [--steps 2000] [--repeat 3]

Each row reports the best wall time per backend, the speedup, and whether the
two backends returned the same values.
"""

import argparse
import time

import numpy as np

from wpextrema import _fallback, _rng

try:
    from wpextrema import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind == "f":
        return np.allclose(a, b, rtol=0, atol=1e-14)
    return np.array_equal(a, b)


def cases(paths, steps):
    key = _rng.seed_hash(2024)
    p0s = np.full(paths, 0.6)
    walk_paths = max(paths // 4, 1)
    m0s = np.full(walk_paths, 30, dtype=np.int64)
    yield "bridge_extrema (grid)", lambda k: k.bridge_extrema(p0s, steps, key, 0, 0.8, False)
    yield "bridge_extrema (continuous)", lambda k: k.bridge_extrema(p0s, steps, key, 0, 0.8, True)
    yield "bridge_paths", lambda k: k.bridge_paths(p0s[: max(paths // 10, 1)], steps, key, 0)
    yield "grid_walk h=1/50", lambda k: k.grid_walk(m0s, 50, 250_000, key, 0, 40)
    yield "nplayer_walk n=3 h=1/60", lambda k: k.nplayer_walk(
        np.array([10, 20, 30], dtype=np.int64), 60, 360_000, key, 0, walk_paths)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    print(f"{'kernel':<30}{'cython s':>10}{'python s':>10}{'speedup':>9}  match")
    for name, call in cases(args.paths, args.steps):
        tc, oc = best_time(lambda: call(_kernels), args.repeat)
        tp, op = best_time(lambda: call(_fallback), args.repeat)
        print(f"{name:<30}{tc:>10.3f}{tp:>10.3f}{tp / tc:>8.1f}x  {same(oc, op)}")


if __name__ == "__main__":
    main()
