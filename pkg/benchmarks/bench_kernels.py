"""Compare the compiled and numpy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--rows 4000] [--cols 24] [--repeat 5]

Prints the best-of-``repeat`` wall time for each kernel under each backend
and checks that both backends return identical results.
"""

import argparse
import timeit

import numpy as np

from tierscope import kernels
from tierscope.regions import CartParams, fit_cart


def _data(rows, cols, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(rows, cols)).astype(np.float64)
    y = X @ rng.uniform(0, 10, cols) + rng.normal(0, 0.5, rows)
    return X, y


def _cases(X, y):
    order = np.argsort(X, axis=0, kind="stable")
    rank = np.random.default_rng(1).permutation(len(y)).astype(np.int64)
    return {
        "best_split": lambda b: kernels.best_split(X, y, order, 5, backend=b),
        "concordance": lambda b: kernels.concordance_counts(rank, y, backend=b),
        "fit_cart": lambda b: fit_cart(X, y, CartParams(min_leaf=5), backend=b).to_dict(),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4000)
    ap.add_argument("--cols", type=int, default=24)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    try:
        kernels.get_backend("cython")
        backends = ["python", "cython"]
    except ImportError:
        backends = ["python"]
        print("compiled kernels not built; timing the numpy fallback only")

    X, y = _data(args.rows, args.cols)
    print(f"rows={args.rows} cols={args.cols} best of {args.repeat}")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, run in _cases(X, y).items():
        results = [run(b) for b in backends]
        if any(r != results[0] for r in results[1:]):
            raise SystemExit(f"{name}: backends disagree")
        times = [min(timeit.repeat(lambda: run(b), number=1, repeat=args.repeat)) for b in backends]
        line = f"{name:<12}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[0] / times[1]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
