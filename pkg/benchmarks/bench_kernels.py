"""Time the compiled explicit step against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 201 1201 4801] [--repeat 200]
"""
import argparse
import timeit

import numpy as np

from sirwave import _advance_py

try:
    from sirwave._core import advance as compiled
except ImportError:
    compiled = None

COEF = np.array([1.0, 1.0, 1.0, 2.25, 1.0, 1.2, 1.2, 0.3, 0.0, 1.0])


def inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    cur = 0.1 * rng.random((3, n))
    delayed = 0.1 * rng.random((3, n))
    lag = 0.1 * rng.random(n)
    return cur, delayed, lag, np.empty_like(cur)


def per_call(fn, n, repeat):
    cur, delayed, lag, out = inputs(n)
    best = min(timeit.repeat(lambda: fn(cur, delayed, lag, out, 0.2, 0.01, COEF),
                             number=repeat, repeat=5))
    return best / repeat


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[201, 1201, 4801, 19201])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    print(f"{'points':>8}  {'numpy us':>10}  {'cython us':>10}  {'speedup':>8}")
    for n in args.sizes:
        slow = per_call(_advance_py.advance, n, args.repeat)
        if compiled is None:
            print(f"{n:>8}  {slow * 1e6:>10.2f}  {'n/a':>10}  {'n/a':>8}")
            continue
        fast = per_call(compiled, n, args.repeat)
        print(f"{n:>8}  {slow * 1e6:>10.2f}  {fast * 1e6:>10.2f}  {slow / fast:>7.1f}x")


if __name__ == "__main__":
    main()
