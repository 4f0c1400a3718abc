"""Kernel families (RBF, rational quadratic, Matern 5/2) with per-dimension
lengthscales."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import backend


class Family(str, enum.Enum):
    RBF = "rbf"
    RATQUAD = "ratquad"
    MATERN52 = "matern52"


_FAMILY_CODES = {
    Family.RBF: backend.FAMILY_RBF,
    Family.RATQUAD: backend.FAMILY_RATQUAD,
    Family.MATERN52: backend.FAMILY_MATERN52,
}


@dataclass(frozen=True)
class KernelSpec:
    family: Family
    variance: float
    lengthscales: tuple[float, ...]
    alpha: float | None = None

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError(f"variance {self.variance} must be positive")
        if not self.lengthscales or any(l <= 0 for l in self.lengthscales):
            raise ValueError("every lengthscale must be positive")
        if self.family is Family.RATQUAD:
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("RatQuad requires alpha > 0")

    @property
    def n_dims(self) -> int:
        return len(self.lengthscales)


def sqdiffs(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape (n1, n2, D)."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    return np.ascontiguousarray((x1[:, None, :] - x2[None, :, :]) ** 2)


def gram_cross(spec: KernelSpec, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Kernel matrix between two point sets (no noise on the diagonal)."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    if x1.shape[1] != spec.n_dims or x2.shape[1] != spec.n_dims:
        raise ValueError(
            f"input dimension {x1.shape[1]}x{x2.shape[1]} does not match "
            f"{spec.n_dims} lengthscales"
        )
    return backend.gram_from_sqdiffs(
        _FAMILY_CODES[spec.family],
        sqdiffs(x1, x2),
        spec.variance,
        np.asarray(spec.lengthscales, dtype=float),
        spec.alpha if spec.alpha is not None else 1.0,
    )


def kernel_eval(spec: KernelSpec, x: np.ndarray, x2: np.ndarray) -> float:
    """Covariance between two single points."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    x2 = np.asarray(x2, dtype=float).reshape(1, -1)
    if x.shape[1] != x2.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {x2.shape[1]}")
    return float(gram_cross(spec, x, x2)[0, 0])


def gram(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    """Symmetric kernel matrix of one point set.

    The lower triangle is mirrored so symmetry holds bitwise regardless of
    how the element loops were vectorized.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    K = gram_cross(spec, x, x)
    upper = np.triu_indices_from(K, 1)
    K[upper] = K.T[upper]
    return K


def family_code(family: Family) -> int:
    return _FAMILY_CODES[family]
