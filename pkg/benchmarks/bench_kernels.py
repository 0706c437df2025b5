"""Compiled kernels versus the numpy fallback on representative sizes.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each row
reports the best wall time per backend and the maximum absolute difference
between their outputs.
"""

import argparse
import timeit

import numpy as np

from esn_rmt import kernels


def _cases(rng):
    n, T = 200, 800
    W = rng.standard_normal((n, n)) * 0.9 / np.sqrt(n)
    m = rng.standard_normal(n)
    drive = rng.standard_normal(T)
    noise = 0.1 * rng.standard_normal((T, n))
    col = 0.5 ** np.arange(2000)
    col[0] += 1.0
    B = rng.standard_normal((600, 600))
    lam = 0.9 * np.exp(2j * np.pi * rng.random(2000)) * np.sqrt(rng.random(2000))
    d = rng.standard_normal(2000) + 1j * rng.standard_normal(2000)
    t = rng.standard_normal(300)
    hist = np.full(171, 1.2)
    return {
        "mackey_glass_rk4": ((20000, 0.1, 0.2, 0.1, 10.0, 170, hist), {}),
        "reservoir_states": ((W, m, drive, noise, np.zeros(n)), {}),
        "gs_lag_sums": ((col,), {}),
        "toeplitz_inverse_dense": ((col[:600],), {}),
        "lag_sums": ((B,), {}),
        "power_moments": ((lam, d, 300), {}),
        "poly_eval": ((t, lam), {}),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled extension not available; only the fallback can be timed")
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':<24}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}{'max |diff|':>14}")
    for name, (a, kw) in cases.items():
        py = getattr(kernels.python_backend, name)
        t_py = min(timeit.repeat(lambda: py(*a, **kw), number=1, repeat=args.repeat))
        if kernels.compiled_backend is None:
            print(f"{name:<24}{t_py * 1e3:>14.2f}{'-':>16}{'-':>10}{'-':>14}")
            continue
        cy = getattr(kernels.compiled_backend, name)
        t_cy = min(timeit.repeat(lambda: cy(*a, **kw), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(py(*a, **kw)) - np.asarray(cy(*a, **kw)))))
        print(f"{name:<24}{t_py * 1e3:>14.2f}{t_cy * 1e3:>16.2f}{t_py / t_cy:>10.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
