"""Times the two hot kernels on both backends and prints the speedups.

Run:  python3 benchmarks/bench_kernels.py
The numba side is warmed up once before timing so compilation cost is not
charged to the measurement.
"""

import time

import numpy as np

from ncprob._kernels import numpy_impl
from ncprob.cumulants import MONOTONE, _encode_noncrossing

try:
    from ncprob._kernels import numba_impl
except ImportError:
    numba_impl = None


def _time(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _kpi_case(d, n, rng):
    parts = list(MONOTONE.partitions(n))
    f, l, s = _encode_noncrossing(parts, n)
    w = rng.normal(size=f.shape[0])
    cums = [rng.normal(size=(d * d,) * m) + 1j * rng.normal(size=(d * d,) * m)
            for m in range(1, n + 1)]
    return f, l, s, w, cums


def bench_weighted_kpi_sum(rows):
    rng = np.random.default_rng(1)
    for d, n in ((2, 5), (2, 6), (3, 5)):
        f, l, s, w, cums = _kpi_case(d, n, rng)
        t_np = _time(lambda: numpy_impl.weighted_kpi_sum(f, l, s, w, cums, d))
        if numba_impl is None:
            rows.append((f"kpi_sum d={d} n={n}", t_np, None))
            continue
        numba_impl.weighted_kpi_sum(f, l, s, w, cums, d)   # warm-up/compile
        t_nb = _time(lambda: numba_impl.weighted_kpi_sum(f, l, s, w, cums, d))
        a = numpy_impl.weighted_kpi_sum(f, l, s, w, cums, d)
        b = numba_impl.weighted_kpi_sum(f, l, s, w, cums, d)
        assert np.abs(a - b).max() < 1e-10
        rows.append((f"kpi_sum d={d} n={n}", t_np, t_nb))


def bench_realized_moment_maps(rows):
    rng = np.random.default_rng(2)
    for d, k, N in ((2, 4, 6), (3, 3, 6), (2, 8, 5)):
        a = rng.normal(size=(d * k, d * k))
        a = (a + a.T) / 2
        t_np = _time(lambda: numpy_impl.realized_moment_maps(
            a, 0, None, N, d, k))
        if numba_impl is None:
            rows.append((f"moment_maps d={d} k={k} N={N}", t_np, None))
            continue
        numba_impl.realized_moment_maps(a, 0, None, N, d, k)
        t_nb = _time(lambda: numba_impl.realized_moment_maps(
            a, 0, None, N, d, k))
        for x, y in zip(numpy_impl.realized_moment_maps(a, 0, None, N, d, k),
                        numba_impl.realized_moment_maps(a, 0, None, N, d, k)):
            assert np.abs(x - y).max() < 1e-10
        rows.append((f"moment_maps d={d} k={k} N={N}", t_np, t_nb))


def main():
    rows = []
    bench_weighted_kpi_sum(rows)
    bench_realized_moment_maps(rows)
    name_w = max(len(r[0]) for r in rows)
    print(f"{'case':<{name_w}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for name, t_np, t_nb in rows:
        if t_nb is None:
            print(f"{name:<{name_w}}  {t_np * 1e3:>8.2f}ms  {'n/a':>10}"
                  f"  {'n/a':>8}")
        else:
            print(f"{name:<{name_w}}  {t_np * 1e3:>8.2f}ms"
                  f"  {t_nb * 1e3:>8.2f}ms  {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
