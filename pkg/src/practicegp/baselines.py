"""Regression baselines for practice-mode selection.

A linear utility model with mode interactions (grid-searching the modality
weight), a logistic model predicting the teacher's pick directly, and a
fixed previously-published decision rule. All share one selection-accuracy
interface with the GP policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .dataset import Dataset, PracticeMode, PracticeTuple
from .errors import DegenerateDatasetError, SingularDesignError
from .policy import UtilityParams, utility

REFERENCE_RULE_COEFFS = (-0.283, 8.124, -6.734)
REFERENCE_RULE_THRESHOLD = 0.5

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100
_SEPARATION_NORM = 1e4

_LINEAR_COLUMNS = ("intercept", "pm", "t_pre", "p_pre", "pm*t_pre", "pm*p_pre")
_LOGISTIC_COLUMNS = ("intercept", "t_pre", "p_pre")


@dataclass(frozen=True)
class LinearModel:
    """OLS utility predictor u ~ 1 + pm + t_pre + p_pre + pm:t_pre + pm:p_pre (+ bpm)."""

    coefficients: tuple[float, ...]
    r_squared: float
    includes_bpm: bool
    a: float

    def predict_utility(self, pm: int, t_pre: float, p_pre: float, bpm: float = 0.0) -> float:
        x = [1.0, float(pm), t_pre, p_pre, pm * t_pre, pm * p_pre]
        if self.includes_bpm:
            x.append(bpm)
        return float(np.dot(self.coefficients, x))

    def select_pm(self, t_pre: float, p_pre: float, bpm: float = 0.0) -> PracticeMode:
        u_pitch = self.predict_utility(0, t_pre, p_pre, bpm)
        u_timing = self.predict_utility(1, t_pre, p_pre, bpm)
        return PracticeMode.TIMING if u_timing > u_pitch else PracticeMode.PITCH


@dataclass(frozen=True)
class LogisticModel:
    """MLE logistic predictor of the teacher's pick from pre-practice errors."""

    coefficients: tuple[float, ...]
    includes_bpm: bool
    converged: bool
    separated: bool
    log_likelihood: float
    log_likelihood_trace: tuple[float, ...] = ()
    threshold: float = 0.5  # probability threshold; equals score > 0 on the linear scale

    def decision_score(self, t_pre: float, p_pre: float, bpm: float = 0.0) -> float:
        x = [1.0, t_pre, p_pre]
        if self.includes_bpm:
            x.append(bpm)
        return float(np.dot(self.coefficients, x))

    def predict_pm(self, t_pre: float, p_pre: float, bpm: float = 0.0) -> PracticeMode:
        score = self.decision_score(t_pre, p_pre, bpm)
        return PracticeMode.TIMING if score > 0.0 else PracticeMode.PITCH


def _design_linear(dataset: Dataset, include_bpm: bool) -> tuple[np.ndarray, list[str]]:
    rows = []
    for t in dataset:
        pm = float(t.pm)
        row = [1.0, pm, t.t_pre, t.p_pre, pm * t.t_pre, pm * t.p_pre]
        if include_bpm:
            row.append(t.bpm)
        rows.append(row)
    names = list(_LINEAR_COLUMNS) + (["bpm"] if include_bpm else [])
    return np.array(rows), names


def _check_rank(design: np.ndarray, names: list[str]) -> None:
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        # pivoted QR: columns pivoted past the numerical rank are the dependent ones
        _, _, pivots = scipy.linalg.qr(design, mode="economic", pivoting=True)
        dependent = sorted(names[j] for j in pivots[rank:])
        raise SingularDesignError("design matrix is rank deficient", dependent)


def fit_linear(dataset: Dataset, a: float, include_bpm: bool = False) -> LinearModel:
    """Least-squares fit of the interaction model to utilities at weight `a`.

    Targets use a zero mean offset; the intercept absorbs it. R^2 is defined
    as 0 when the targets are constant.
    """
    design, names = _design_linear(dataset, include_bpm)
    if len(dataset) < design.shape[1]:
        raise DegenerateDatasetError(
            f"need at least {design.shape[1]} tuples for {design.shape[1]} coefficients"
        )
    _check_rank(design, names)
    y = np.array([utility(t, UtilityParams(a, 0.0)) for t in dataset])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coef
    ss_res = float(residuals @ residuals)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    # constant targets (up to rounding) have no variance to explain
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.abs(y).max())):
        r_squared = 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return LinearModel(
        coefficients=tuple(float(c) for c in coef),
        r_squared=r_squared,
        includes_bpm=include_bpm,
        a=a,
    )


@dataclass(frozen=True)
class GridSearchResult:
    best_accuracy: float
    best_values: tuple[float, ...]  # grid points attaining the maximum
    intervals: tuple[tuple[float, float], ...]  # contiguous runs of best grid points
    accuracies: tuple[float, ...]
    grid: tuple[float, ...]


def grid_search_a(dataset: Dataset, step: float = 0.01, include_bpm: bool = False) -> GridSearchResult:
    """Exhaustively score the modality weight on [0, 1].

    For each grid value the linear model is fit and each tuple's mode is
    chosen by the larger predicted utility; accuracy is agreement with the
    teacher. Returns all maximizing grid values grouped into intervals.
    """
    n_steps = round(1.0 / step)
    if abs(n_steps * step - 1.0) > 1e-9:
        raise ValueError("step must divide 1 exactly")
    grid = [k * step for k in range(n_steps + 1)]
    accuracies = []
    for a in grid:
        model = fit_linear(dataset, a, include_bpm)
        accuracies.append(selection_accuracy(
            lambda t: model.select_pm(t.t_pre, t.p_pre, t.bpm), dataset
        ))
    best = max(accuracies)
    best_values = tuple(a for a, acc in zip(grid, accuracies) if acc == best)
    intervals = []
    start = prev = None
    for a, acc in zip(grid, accuracies):
        if acc == best:
            if start is None:
                start = a
            prev = a
        elif start is not None:
            intervals.append((start, prev))
            start = None
    if start is not None:
        intervals.append((start, prev))
    return GridSearchResult(
        best_accuracy=best,
        best_values=best_values,
        intervals=tuple(intervals),
        accuracies=tuple(accuracies),
        grid=tuple(grid),
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_likelihood(design: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    z = design @ beta
    # log sigma(z) = -log(1+exp(-z)), computed stably
    return float(np.sum(np.where(y == 1, -np.logaddexp(0.0, -z), -np.logaddexp(0.0, z))))


def fit_logistic(dataset: Dataset, include_bpm: bool = False) -> LogisticModel:
    """Maximum-likelihood logistic fit by iteratively reweighted least squares.

    Stops when the largest coefficient update falls below 1e-8 or after 100
    iterations. Newton steps are halved when they would reduce the
    likelihood, so the likelihood trace is nondecreasing. Perfectly separable
    data is detected by coefficient blow-up and flagged instead of raising.
    """
    if not dataset.has_both_modes():
        raise DegenerateDatasetError("logistic fit needs both practice modes present")
    rows = []
    for t in dataset:
        row = [1.0, t.t_pre, t.p_pre]
        if include_bpm:
            row.append(t.bpm)
        rows.append(row)
    design = np.array(rows)
    names = list(_LOGISTIC_COLUMNS) + (["bpm"] if include_bpm else [])
    _check_rank(design, names)
    y = np.array([int(t.pm) for t in dataset], dtype=float)

    beta = np.zeros(design.shape[1])
    ll = _log_likelihood(design, y, beta)
    trace = [ll]
    converged = False
    separated = False
    for _ in range(IRLS_MAX_ITER):
        p = _sigmoid(design @ beta)
        w = p * (1.0 - p)
        gradient = design.T @ (y - p)
        hessian = design.T @ (design * w[:, None])
        try:
            delta = np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError:
            delta, *_ = np.linalg.lstsq(hessian, gradient, rcond=None)
        # step-halving keeps the likelihood nondecreasing
        step_scale = 1.0
        for _ in range(30):
            candidate = beta + step_scale * delta
            ll_new = _log_likelihood(design, y, candidate)
            if ll_new >= ll:
                break
            step_scale *= 0.5
        beta = beta + step_scale * delta
        ll = max(ll, ll_new)
        trace.append(ll)
        if np.max(np.abs(step_scale * delta)) < IRLS_TOL:
            converged = True
            break
        if np.max(np.abs(beta)) > _SEPARATION_NORM:
            separated = True
            break
    return LogisticModel(
        coefficients=tuple(float(b) for b in beta),
        includes_bpm=include_bpm,
        converged=converged,
        separated=separated,
        log_likelihood=ll,
        log_likelihood_trace=tuple(trace),
    )


def reference_rule(t_pre: float, p_pre: float) -> PracticeMode:
    """Fixed previously-fitted rule: timing practice when the linear score
    -0.283 + 8.124*t_pre - 6.734*p_pre exceeds 0.5."""
    intercept, b_t, b_p = REFERENCE_RULE_COEFFS
    score = intercept + b_t * t_pre + b_p * p_pre
    return PracticeMode.TIMING if score > REFERENCE_RULE_THRESHOLD else PracticeMode.PITCH


def selection_accuracy(predictor: Callable[[PracticeTuple], PracticeMode], dataset: Dataset) -> float:
    """Fraction of tuples whose predicted mode matches the teacher's pick.

    `predictor` maps a tuple to a mode; adapters exist for the linear model
    (utility argmax), the logistic model, the fixed rule, and GP recommend.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    hits = sum(1 for t in dataset if predictor(t) == t.pm)
    return hits / len(dataset)


def evaluation_report(
    train: Dataset,
    test: Dataset | None = None,
    grid_step: float = 0.01,
) -> dict:
    """Fit all baselines on `train` and report accuracies, in-sample and (when
    a test set is given) held out. Keys are stable for diffing."""
    search = grid_search_a(train, step=grid_step)
    best_a = search.best_values[0]
    linear = fit_linear(train, best_a)
    logistic = fit_logistic(train, include_bpm=False)
    logistic_bpm = fit_logistic(train, include_bpm=True)

    def accuracies(dataset: Dataset) -> dict:
        return {
            "linear_argmax": selection_accuracy(
                lambda t: linear.select_pm(t.t_pre, t.p_pre, t.bpm), dataset
            ),
            "logistic": selection_accuracy(
                lambda t: logistic.predict_pm(t.t_pre, t.p_pre), dataset
            ),
            "logistic_bpm": selection_accuracy(
                lambda t: logistic_bpm.predict_pm(t.t_pre, t.p_pre, t.bpm), dataset
            ),
            "reference_rule": selection_accuracy(
                lambda t: reference_rule(t.t_pre, t.p_pre), dataset
            ),
        }

    report = {
        "linear": {
            "best_a_interval": [list(iv) for iv in search.intervals],
            "best_a_values": list(search.best_values),
            "grid_accuracy_at_best": search.best_accuracy,
            "r_squared_at_best_a": linear.r_squared,
            "coefficients": dict(zip(_LINEAR_COLUMNS, linear.coefficients)),
            "chance_level": 0.5,
        },
        "logistic": {
            "coefficients": dict(zip(_LOGISTIC_COLUMNS, logistic.coefficients)),
            "converged": logistic.converged,
            "separated": logistic.separated,
        },
        "logistic_bpm": {
            "coefficients": dict(
                zip(list(_LOGISTIC_COLUMNS) + ["bpm"], logistic_bpm.coefficients)
            ),
            "converged": logistic_bpm.converged,
            "separated": logistic_bpm.separated,
        },
        "accuracy_in_sample": accuracies(train),
    }
    if test is not None and len(test) > 0:
        report["accuracy_held_out"] = accuracies(test)
    return report
