"""Numpy implementation of the hot GP kernels.

Mirrors the compiled extension in `_core.pyx`; the two must agree to
floating-point noise. `d2` arguments are per-dimension squared differences
with shape (n, m, D).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

FAMILY_RBF = 0
FAMILY_RATQUAD = 1
FAMILY_MATERN52 = 2

_LOG_2PI = math.log(2.0 * math.pi)


def _scaled_sq_dist(d2: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore"):
        w = 1.0 / np.asarray(lengthscales, dtype=float) ** 2
    return d2 @ w


def gram_from_sqdiffs(
    family: int, d2: np.ndarray, variance: float, lengthscales: np.ndarray, alpha: float
) -> np.ndarray:
    """Kernel matrix from precomputed squared differences; no noise added."""
    s = _scaled_sq_dist(d2, lengthscales)
    with np.errstate(all="ignore"):
        if family == FAMILY_RBF:
            return variance * np.exp(-0.5 * s)
        if family == FAMILY_RATQUAD:
            return variance * np.exp(-alpha * np.log(1.0 + s / (2.0 * alpha)))
        if family == FAMILY_MATERN52:
            r = np.sqrt(s)
            return variance * (1.0 + math.sqrt(5.0) * r + (5.0 / 3.0) * s) * np.exp(
                -math.sqrt(5.0) * r
            )
    raise ValueError(f"unknown kernel family code {family}")


def lml_from_sqdiffs(
    family: int,
    d2: np.ndarray,
    y: np.ndarray,
    variance: float,
    lengthscales: np.ndarray,
    alpha: float,
    total_noise: float,
    workspace: np.ndarray | None = None,
) -> float:
    """Log marginal likelihood via Cholesky; NaN when the factorization fails.

    `workspace` is accepted for signature parity with the compiled core and
    ignored here.
    """
    n = y.shape[0]
    K = gram_from_sqdiffs(family, d2, variance, lengthscales, alpha)
    K[np.diag_indices(n)] += total_noise
    if not np.isfinite(K).all():
        return math.nan
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return math.nan
    z = solve_triangular(L, y, lower=True, check_finite=False)
    quad = float(z @ z)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    return -0.5 * quad - 0.5 * logdet - 0.5 * n * _LOG_2PI
