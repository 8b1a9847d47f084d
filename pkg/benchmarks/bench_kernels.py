"""Time the compiled cone kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 100 1000 5000]

Each size is the expected atom count of a Poisson cloud on a trapezoid.
Both backends run the same clouds and their outputs are checked for
bitwise equality before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ham_levy import _fallback
from ham_levy.field import SpaceTimeWindow, sample_cloud
from ham_levy.levy import SymmetricTwoPoint

try:
    from ham_levy import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 1000, 5000, 20000])
    args = ap.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not built; run `pip install --no-build-isolation -e .` first")

    window = SpaceTimeWindow(1.0, 20.0)
    print(f"{'atoms':>8} {'backend':>9} {'recursion':>11} {'indexed':>11} {'cone_sum':>10}")
    for size in args.sizes:
        law = SymmetricTwoPoint(1.0, size / window.area())
        c = sample_cloud(window, law, np.random.default_rng(size))
        src = np.ones(len(c))
        ref = _kernels.cone_recursion(c.s, c.y, c.z, src, 1 << 62)
        assert np.array_equal(ref, _fallback.cone_recursion(c.s, c.y, c.z, src, 1 << 62))
        assert np.array_equal(ref, _kernels.cone_recursion(c.s, c.y, c.z, src, 1))
        for name, mod in (("cython", _kernels), ("python", _fallback)):
            naive = best_of(lambda: mod.cone_recursion(c.s, c.y, c.z, src, 1 << 62), args.repeat)
            indexed = best_of(lambda: mod.cone_recursion(c.s, c.y, c.z, src, 1), args.repeat)
            csum = best_of(lambda: mod.cone_sum(c.s, c.y, c.z, ref, 1.0, 0.0), args.repeat)
            print(f"{len(c):>8} {name:>9} {naive * 1e3:>9.3f}ms {indexed * 1e3:>9.3f}ms {csum * 1e6:>8.1f}us")


if __name__ == "__main__":
    main()
