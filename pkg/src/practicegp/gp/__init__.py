"""Exact Gaussian-process regression with a compiled kernel core."""

from .backend import BACKEND
from .kernels import Family, KernelSpec, gram, gram_cross, kernel_eval, sqdiffs
from .model import (
    GPModel,
    InputScaler,
    fit,
    from_hyperparameters,
    from_json,
    log_marginal_likelihood,
    predict,
    predict_batch,
    to_json,
)

__all__ = [
    "BACKEND",
    "Family",
    "GPModel",
    "InputScaler",
    "KernelSpec",
    "fit",
    "from_hyperparameters",
    "from_json",
    "gram",
    "gram_cross",
    "kernel_eval",
    "log_marginal_likelihood",
    "predict",
    "predict_batch",
    "sqdiffs",
    "to_json",
]
