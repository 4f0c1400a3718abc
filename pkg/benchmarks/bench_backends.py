"""Benchmark: compiled kernel core vs the numpy fallback.

The numbers that matter are the marginal-likelihood evaluation (the inner
loop of hyperparameter search) and a full GP fit. Run:

    python benchmarks/bench_backends.py
"""

import os
import time

import numpy as np

from practicegp.gp import Family
from practicegp.gp import _core_numpy as numpy_core
from practicegp.gp import backend
from practicegp.gp.kernels import sqdiffs
from practicegp.gp.model import fit, single_threaded_blas

FAMILY_NAMES = {0: "rbf", 1: "ratquad", 2: "matern52"}


def time_call(fn, min_seconds=0.4):
    fn()  # warm up
    reps = 0
    started = time.perf_counter()
    while time.perf_counter() - started < min_seconds:
        fn()
        reps += 1
    return (time.perf_counter() - started) / reps


def bench_lml(sizes=(60, 133, 240)):
    rng = np.random.default_rng(0)
    print(f"active backend: {backend.BACKEND}")
    print()
    print(f"{'n':>5} {'kernel':>9} {'compiled/active':>16} {'numpy':>10} {'speedup':>8}")
    for n in sizes:
        x = rng.normal(size=(n, 4))
        y = np.ascontiguousarray(rng.normal(size=n))
        d2 = sqdiffs(x, x)
        ls = np.array([1.0, 2.0, 0.5, 3.0])
        workspace = np.empty((n + 2, n))
        for code in (0, 1, 2):
            t_active = time_call(
                lambda: backend.lml_from_sqdiffs(code, d2, y, 1.3, ls, 2.0, 0.5, workspace)
            )
            t_numpy = time_call(
                lambda: numpy_core.lml_from_sqdiffs(code, d2, y, 1.3, ls, 2.0, 0.5)
            )
            print(
                f"{n:>5} {FAMILY_NAMES[code]:>9} {t_active * 1e6:>13.1f} us "
                f"{t_numpy * 1e6:>7.1f} us {t_numpy / t_active:>7.2f}x"
            )


def bench_fit(n=133):
    rng = np.random.default_rng(3)
    x = np.c_[
        rng.uniform(0, 1, n),
        rng.uniform(0, 1, n),
        rng.integers(0, 2, n).astype(float),
        rng.choice([50.0, 80.0, 100.0], n),
    ]
    y = 0.5 * (x[:, 1] - 0.3) * x[:, 2] + 0.4 * (x[:, 0] - 0.2) * (1 - x[:, 2])
    y += 0.01 * rng.normal(size=n)
    mask = np.array([True, True, False, True])

    started = time.perf_counter()
    model = fit(x, y, Family.RATQUAD, seed=5, standardize_mask=mask)
    active = time.perf_counter() - started
    print()
    print(f"full ratquad fit, n={n}, 8 restarts: {active:.2f}s ({backend.BACKEND} backend)")
    print(f"fitted lml {model.lml:.2f}")
    if backend.BACKEND == "compiled":
        print("rerun with PRACTICEGP_BACKEND=numpy to time the fallback end to end")


if __name__ == "__main__":
    with single_threaded_blas():
        bench_lml()
        bench_fit()
