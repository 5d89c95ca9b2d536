"""Time the compiled kernels against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``. Sizes match a default run:
a 2048-cell Godunov update and the increment moments of 36 shifts on a
4096-point grid.
"""

import argparse
import timeit

import numpy as np

from levy_burgers import _fallback

try:
    from levy_burgers import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def bench(fn, repeat):
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    return min(t.repeat(repeat, n)) / n


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    u = rng.standard_normal(2048)
    diffs = rng.standard_normal((36, 4096))
    powers = np.array([0.5, 1.0, 2.0, 3.0])
    cases = {
        "godunov_update": lambda m: (lambda: m.godunov_update(u, 0.2)),
        "increment_power_means": lambda m: (lambda: m.increment_power_means(diffs, powers)),
    }
    print(f"{'kernel':24s} {'numpy [us]':>12s} {'cython [us]':>12s} {'speedup':>8s}")
    for name, make in cases.items():
        py = bench(make(_fallback), args.repeat) * 1e6
        if _kernels is None:
            print(f"{name:24s} {py:12.1f} {'n/a':>12s}")
            continue
        cy = bench(make(_kernels), args.repeat) * 1e6
        print(f"{name:24s} {py:12.1f} {cy:12.1f} {py / cy:8.2f}")


if __name__ == "__main__":
    main()
