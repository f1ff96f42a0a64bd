"""Benchmark the numba-compiled kernels against their pure-numpy twins.

Run: python3 benchmarks/bench_kernels.py

Both implementations are imported directly (bypassing the import-time backend
switch) so a single process can time both paths and verify they agree.
"""

import time

import numpy as np

from dlfault._kernels import (
    _best_split_loop,
    _best_split_numpy,
    _octet_loop,
    _octet_numpy,
    _sq_dists_loop,
    _sq_dists_numpy,
)

try:
    from numba import njit

    compiled = {
        "best_split": njit(cache=True)(_best_split_loop),
        "sq_dists": njit(cache=True)(_sq_dists_loop),
        "octet": njit(cache=True)(_octet_loop),
    }
except ImportError:
    compiled = None

pure = {
    "best_split": _best_split_numpy,
    "sq_dists": _sq_dists_numpy,
    "octet": _octet_numpy,
}


def timeit(fn, args, repeat=200):
    fn(*args)  # warm (JIT compile / cache touch)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    rng = np.random.default_rng(0)
    n, d = 400, 160
    X = rng.uniform(0, 1, (n, d))
    y = rng.integers(0, 2, n).astype(np.int64)
    feats = np.arange(d, dtype=np.int64)
    q = rng.uniform(0, 1, d)
    seq = np.sort(rng.normal(0, 1, 5000))

    cases = {
        "best_split": (X, y, feats),
        "sq_dists": (X, q),
        "octet": (seq,),
    }

    print(f"{'kernel':<12} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, args in cases.items():
        t_np = timeit(pure[name], args)
        base = np.asarray(pure[name](*args), dtype=np.float64)
        if compiled is None:
            print(f"{name:<12} {t_np * 1e3:>12.4f} {'n/a':>12} {'n/a':>9}")
            continue
        t_nb = timeit(compiled[name], args)
        got = np.asarray(compiled[name](*args), dtype=np.float64)
        assert np.allclose(base, got, equal_nan=True), f"{name}: paths disagree"
        print(
            f"{name:<12} {t_np * 1e3:>12.4f} {t_nb * 1e3:>12.4f} "
            f"{t_np / t_nb:>8.1f}x"
        )
    if compiled is not None:
        print("all kernels agree between numba and numpy paths")


if __name__ == "__main__":
    main()
