"""Compare the numba and numpy batch kernels.

    python3 benchmarks/bench_kernels.py --matrices 10000 --repeat 5

Both backends are timed on the same random integer matrices, first for one
metric value per matrix and then for the unit-increment sweep the
monotonicity search uses.  The numba compile is excluded (one warm-up call).
"""
import argparse
import time

import numpy as np

from clfeval import kernels
from clfeval.metrics import TABLE_METRICS


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--matrices", type=int, default=10_000)
    parser.add_argument("--n", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    cells = rng.integers(0, 101, size=(args.matrices, args.n, args.n)).astype(np.float64)
    if "numba" not in kernels.available_backends():
        print("numba is not importable; only the numpy backend can run")
        return
    print(f"{args.matrices} matrices of size {args.n}, best of {args.repeat}")
    print(f"{'metric':<20}{'op':<12}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for metric in TABLE_METRICS:
        for op, fn in (("value", kernels.batch_metric), ("increments", kernels.batch_increments)):
            fn(cells[:2], metric, backend="numba")
            t_np = _best(lambda: fn(cells, metric, backend="numpy"), args.repeat)
            t_nb = _best(lambda: fn(cells, metric, backend="numba"), args.repeat)
            a = fn(cells, metric, backend="numpy")
            b = fn(cells, metric, backend="numba")
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12, equal_nan=True), metric.name
            print(f"{metric.name:<20}{op:<12}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
