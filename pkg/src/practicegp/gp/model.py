"""Exact GP regression: marginal-likelihood hyperparameter search, prediction,
and model serialization.

Inputs are z-scored per dimension (binary columns stay raw) and targets are
centered; the prior mean is zero on the centered targets and the stored mean
is added back at prediction. Hyperparameters are searched in log space with
Nelder-Mead from several seeded restarts.
"""

from __future__ import annotations

import json
import math
import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from threadpoolctl import threadpool_limits

from ..errors import NumericalError
from . import backend
from .kernels import Family, KernelSpec, family_code, gram_cross, sqdiffs

JITTERS = (1e-8, 1e-6, 1e-4)
NOISE_FLOOR = 1e-6
N_RESTARTS = 8
MAX_EVALS = 2000
SIMPLEX_TOL = 1e-6

MODEL_SCHEMA_VERSION = 1

_blas_limit_lock = threading.Lock()
_blas_limit_depth = 0


@contextmanager
def single_threaded_blas():
    """Pin BLAS to one thread for the duration of a hot loop.

    Multithreaded BLAS is counterproductive on the small matrices used here
    and makes factorizations run-to-run dependent on the thread count. The
    outermost caller wins; nested uses (e.g. fold fits inside a Bayesian
    optimization loop) are no-ops, so worker threads never race on the
    process-global setting.
    """
    global _blas_limit_depth
    with _blas_limit_lock:
        _blas_limit_depth += 1
        outermost = _blas_limit_depth == 1
    limiter = threadpool_limits(limits=1, user_api="blas") if outermost else None
    try:
        yield
    finally:
        if limiter is not None:
            limiter.restore_original_limits()
        with _blas_limit_lock:
            _blas_limit_depth -= 1


@dataclass(frozen=True)
class InputScaler:
    """Per-dimension affine scaling; identity (mean 0, std 1) on binary dims."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - np.asarray(self.mean)) / np.asarray(self.std)

    @classmethod
    def from_data(cls, x: np.ndarray, standardize_mask: np.ndarray) -> "InputScaler":
        mean = np.where(standardize_mask, x.mean(axis=0), 0.0)
        std = np.where(standardize_mask, x.std(axis=0), 1.0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean=tuple(float(v) for v in mean), std=tuple(float(v) for v in std))


@dataclass
class GPModel:
    """Fitted exact-GP state; treat as immutable once constructed."""

    kernel: KernelSpec
    noise_variance: float
    scaler: InputScaler
    target_mean: float
    inputs: np.ndarray  # standardized, shape (N, D)
    targets: np.ndarray  # centered, shape (N,)
    cholesky_factor: np.ndarray  # lower triangular, chol(K + (noise+jitter) I)
    alpha_vector: np.ndarray
    jitter: float
    lml: float
    raw_inputs: np.ndarray
    raw_targets: np.ndarray

    @property
    def n_train(self) -> int:
        return self.inputs.shape[0]


def detect_binary_columns(x: np.ndarray) -> np.ndarray:
    """True for columns whose values all lie in {0, 1}."""
    return np.array([set(np.unique(x[:, d])) <= {0.0, 1.0} for d in range(x.shape[1])])


def log_marginal_likelihood(
    kernel: KernelSpec, noise_variance: float, x: np.ndarray, y: np.ndarray
) -> float:
    """-1/2 y^T (K+s I)^-1 y - 1/2 log|K+s I| - N/2 log 2pi, via Cholesky.

    Jitter escalates from 1e-8 to 1e-4 before giving up.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.ascontiguousarray(np.asarray(y, dtype=float))
    d2 = sqdiffs(x, x)
    ls = np.asarray(kernel.lengthscales, dtype=float)
    alpha = kernel.alpha if kernel.alpha is not None else 1.0
    code = family_code(kernel.family)
    for jitter in JITTERS:
        value = backend.lml_from_sqdiffs(
            code, d2, y, kernel.variance, ls, alpha, noise_variance + jitter
        )
        if math.isfinite(value):
            return value
    raise NumericalError("covariance matrix is not positive definite at maximum jitter")


def nelder_mead(fn, x0: np.ndarray, max_evals: int = MAX_EVALS, tol: float = SIMPLEX_TOL):
    """Minimize `fn` with a plain Nelder-Mead simplex.

    Terminates when the simplex diameter (inf-norm spread around the best
    vertex) drops below `tol` or after `max_evals` function evaluations.
    Fully deterministic; kept in-tree so the termination rule and the eval
    budget are exact rather than library defaults.

    Returns (best_x, best_f, n_evals).
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    sim = np.repeat(x0[None, :], n + 1, axis=0)
    for k in range(n):
        if sim[k + 1, k] != 0.0:
            sim[k + 1, k] *= 1.05
        else:
            sim[k + 1, k] = 0.00025

    fvals = np.full(n + 1, math.inf)
    n_evals = 0

    class _BudgetExhausted(Exception):
        pass

    def evaluate(point):
        nonlocal n_evals
        if n_evals >= max_evals:
            raise _BudgetExhausted
        n_evals += 1
        return fn(point)

    try:
        for i in range(n + 1):
            fvals[i] = evaluate(sim[i])

        while True:
            order = np.argsort(fvals, kind="stable")
            sim = sim[order]
            fvals = fvals[order]
            if np.max(np.abs(sim[1:] - sim[0])) < tol:
                break

            centroid = sim[:-1].mean(axis=0)
            xr = centroid + (centroid - sim[-1])
            fr = evaluate(xr)
            if fr < fvals[0]:
                xe = centroid + 2.0 * (centroid - sim[-1])
                fe = evaluate(xe)
                if fe < fr:
                    sim[-1], fvals[-1] = xe, fe
                else:
                    sim[-1], fvals[-1] = xr, fr
            elif fr < fvals[-2]:
                sim[-1], fvals[-1] = xr, fr
            else:
                if fr < fvals[-1]:  # outside contraction
                    xc = centroid + 0.5 * (centroid - sim[-1])
                    fc = evaluate(xc)
                    accept = fc <= fr
                else:  # inside contraction
                    xc = centroid - 0.5 * (centroid - sim[-1])
                    fc = evaluate(xc)
                    accept = fc < fvals[-1]
                if accept:
                    sim[-1], fvals[-1] = xc, fc
                else:  # shrink toward the best vertex
                    for i in range(1, n + 1):
                        sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                        fvals[i] = evaluate(sim[i])
    except _BudgetExhausted:
        pass

    best = int(np.argmin(fvals))
    return sim[best].copy(), float(fvals[best]), n_evals


def _pack(variance: float, lengthscales: np.ndarray, noise: float, alpha: float | None) -> np.ndarray:
    parts = [math.log(variance), *np.log(lengthscales), math.log(noise - NOISE_FLOOR)]
    if alpha is not None:
        parts.append(math.log(alpha))
    return np.array(parts)


def _unpack(theta: np.ndarray, n_dims: int, has_alpha: bool):
    variance = math.exp(min(theta[0], 700.0))
    lengthscales = np.array([math.exp(min(t, 700.0)) for t in theta[1 : 1 + n_dims]])
    noise = NOISE_FLOOR + math.exp(min(theta[1 + n_dims], 700.0))
    alpha = math.exp(min(theta[2 + n_dims], 700.0)) if has_alpha else None
    return variance, lengthscales, noise, alpha


def _objective(theta, code, n_dims, has_alpha, d2, yc, workspace):
    variance, lengthscales, noise, alpha = _unpack(theta, n_dims, has_alpha)
    for jitter in JITTERS:
        value = backend.lml_from_sqdiffs(
            code, d2, yc, variance, lengthscales, alpha if has_alpha else 1.0,
            noise + jitter, workspace,
        )
        if math.isfinite(value):
            return -value
    return math.inf


def _factorize(
    kernel: KernelSpec, noise: float, d2: np.ndarray, yc: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Cholesky of K + (noise+jitter) I and the weight vector (K+sI)^-1 y."""
    K = backend.gram_from_sqdiffs(
        family_code(kernel.family),
        d2,
        kernel.variance,
        np.asarray(kernel.lengthscales, dtype=float),
        kernel.alpha if kernel.alpha is not None else 1.0,
    )
    n = K.shape[0]
    for jitter in JITTERS:
        try:
            L = np.linalg.cholesky(K + (noise + jitter) * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        z = solve_triangular(L, yc, lower=True, check_finite=False)
        alpha_vec = solve_triangular(L.T, z, lower=False, check_finite=False)
        return L, alpha_vec, jitter
    raise NumericalError("covariance matrix is not positive definite at maximum jitter")


def fit(
    x: np.ndarray,
    y: np.ndarray,
    family: Family,
    seed: int,
    standardize_mask: np.ndarray | None = None,
) -> GPModel:
    """Fit kernel + noise hyperparameters by maximizing the log marginal
    likelihood over 8 seeded Nelder-Mead restarts.

    Restart k's initial lengthscales are drawn log-uniform over [0.1, 10]
    times each dimension's standard deviation. Deterministic for a fixed
    (x, y, family, seed, backend).
    """
    x_raw = np.atleast_2d(np.asarray(x, dtype=float))
    y_raw = np.asarray(y, dtype=float).ravel()
    n, n_dims = x_raw.shape
    if n < 2:
        raise ValueError("need at least 2 training rows")
    if y_raw.shape[0] != n:
        raise ValueError("x and y row counts differ")

    if standardize_mask is None:
        standardize_mask = ~detect_binary_columns(x_raw)
    scaler = InputScaler.from_data(x_raw, np.asarray(standardize_mask, dtype=bool))
    xs = np.ascontiguousarray(scaler.transform(x_raw))
    target_mean = float(y_raw.mean())
    yc = np.ascontiguousarray(y_raw - target_mean)

    d2 = sqdiffs(xs, xs)
    dim_stds = xs.std(axis=0)
    dim_stds = np.where(dim_stds > 0, dim_stds, 1.0)
    y_var = float(yc.var())
    if y_var <= 0:
        y_var = 1.0

    code = family_code(family)
    has_alpha = family is Family.RATQUAD
    rng = np.random.default_rng(seed)
    workspace = np.empty((n + 2, n))

    best_theta = None
    best_value = math.inf
    with single_threaded_blas():
        for _ in range(N_RESTARTS):
            ls0 = dim_stds * 10.0 ** rng.uniform(-1.0, 1.0, size=n_dims)
            v0 = y_var * 10.0 ** rng.uniform(-0.5, 0.5)
            noise0 = max(y_var * 10.0 ** rng.uniform(-2.0, -0.5), 2.0 * NOISE_FLOOR)
            alpha0 = 10.0 ** rng.uniform(-1.0, 1.0) if has_alpha else None
            theta0 = _pack(v0, ls0, noise0, alpha0)
            theta, value, _ = nelder_mead(
                lambda th: _objective(th, code, n_dims, has_alpha, d2, yc, workspace),
                theta0,
            )
            if math.isfinite(value) and value < best_value:
                best_value = value
                best_theta = theta

    if best_theta is None:
        raise NumericalError("every restart failed the Cholesky factorization")

    variance, lengthscales, noise, alpha = _unpack(best_theta, n_dims, has_alpha)
    kernel = KernelSpec(
        family=family,
        variance=variance,
        lengthscales=tuple(float(l) for l in lengthscales),
        alpha=alpha,
    )
    L, alpha_vec, jitter = _factorize(kernel, noise, d2, yc)
    return GPModel(
        kernel=kernel,
        noise_variance=noise,
        scaler=scaler,
        target_mean=target_mean,
        inputs=xs,
        targets=yc,
        cholesky_factor=L,
        alpha_vector=alpha_vec,
        jitter=jitter,
        lml=-best_value,
        raw_inputs=x_raw,
        raw_targets=y_raw,
    )


def from_hyperparameters(
    kernel: KernelSpec,
    noise_variance: float,
    x: np.ndarray,
    y: np.ndarray,
    standardize_inputs: bool = False,
    center_targets: bool = False,
) -> GPModel:
    """Build a model at fixed hyperparameters (no search)."""
    x_raw = np.atleast_2d(np.asarray(x, dtype=float))
    y_raw = np.asarray(y, dtype=float).ravel()
    mask = (
        ~detect_binary_columns(x_raw)
        if standardize_inputs
        else np.zeros(x_raw.shape[1], dtype=bool)
    )
    scaler = InputScaler.from_data(x_raw, mask)
    xs = np.ascontiguousarray(scaler.transform(x_raw))
    target_mean = float(y_raw.mean()) if center_targets else 0.0
    yc = np.ascontiguousarray(y_raw - target_mean)
    d2 = sqdiffs(xs, xs)
    L, alpha_vec, jitter = _factorize(kernel, noise_variance, d2, yc)
    lml = log_marginal_likelihood(kernel, noise_variance, xs, yc)
    return GPModel(
        kernel=kernel,
        noise_variance=noise_variance,
        scaler=scaler,
        target_mean=target_mean,
        inputs=xs,
        targets=yc,
        cholesky_factor=L,
        alpha_vector=alpha_vec,
        jitter=jitter,
        lml=lml,
        raw_inputs=x_raw,
        raw_targets=y_raw,
    )


def predict_batch(model: GPModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance (noise included) for a batch of points."""
    xq = np.atleast_2d(np.asarray(x, dtype=float))
    xs = model.scaler.transform(xq)
    k_cross = gram_cross(model.kernel, model.inputs, xs)  # (N, M)
    mean = model.target_mean + k_cross.T @ model.alpha_vector
    v = solve_triangular(model.cholesky_factor, k_cross, lower=True, check_finite=False)
    variance = model.kernel.variance + model.noise_variance - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(variance, 0.0)


def predict(model: GPModel, x: np.ndarray) -> tuple[float, float]:
    """Predictive mean and variance at a single point."""
    mean, variance = predict_batch(model, np.asarray(x, dtype=float).reshape(1, -1))
    return float(mean[0]), float(variance[0])


def to_json(model: GPModel) -> str:
    """Serialize a model; byte-stable for a fixed model."""
    doc = {
        "schema": MODEL_SCHEMA_VERSION,
        "family": model.kernel.family.value,
        "variance": model.kernel.variance,
        "lengthscales": list(model.kernel.lengthscales),
        "alpha": model.kernel.alpha,
        "noise_variance": model.noise_variance,
        "jitter": model.jitter,
        "scaler_mean": list(model.scaler.mean),
        "scaler_std": list(model.scaler.std),
        "target_mean": model.target_mean,
        "lml": model.lml,
        "inputs": [list(row) for row in model.raw_inputs.tolist()],
        "targets": model.raw_targets.tolist(),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def from_json(text: str) -> GPModel:
    doc = json.loads(text)
    if doc.get("schema") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema {doc.get('schema')!r}")
    kernel = KernelSpec(
        family=Family(doc["family"]),
        variance=doc["variance"],
        lengthscales=tuple(doc["lengthscales"]),
        alpha=doc["alpha"],
    )
    x_raw = np.asarray(doc["inputs"], dtype=float)
    y_raw = np.asarray(doc["targets"], dtype=float)
    scaler = InputScaler(mean=tuple(doc["scaler_mean"]), std=tuple(doc["scaler_std"]))
    xs = np.ascontiguousarray(scaler.transform(x_raw))
    yc = np.ascontiguousarray(y_raw - doc["target_mean"])
    d2 = sqdiffs(xs, xs)
    L, alpha_vec, jitter = _factorize(kernel, doc["noise_variance"], d2, yc)
    return GPModel(
        kernel=kernel,
        noise_variance=doc["noise_variance"],
        scaler=scaler,
        target_mean=doc["target_mean"],
        inputs=xs,
        targets=yc,
        cholesky_factor=L,
        alpha_vector=alpha_vec,
        jitter=jitter,
        lml=doc["lml"],
        raw_inputs=x_raw,
        raw_targets=y_raw,
    )
