"""Practice-mode scaffolding policy.

Turns practice tuples into utility targets (a weighted blend of pitch and
timing improvement minus a mean offset), trains a GP utility predictor over
(p_pre, t_pre, pm, bpm), scores it by agreement with the teacher's argmax
choice, and Bayesian-optimizes the utility weights against that agreement.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import erf

from .dataset import Dataset, PracticeMode, PracticeTuple
from .errors import DegenerateDatasetError
from .gp import Family, GPModel, fit, predict_batch
from .gp.model import single_threaded_blas

INPUT_COLUMNS = ("p_pre", "t_pre", "pm", "bpm")
STANDARDIZE_MASK = np.array([True, True, False, True])

TIE_EPS = 1e-12
DEFAULT_XI = 0.01
N_INITIAL_DESIGN = 8
EI_GRID_SIZE = 101
N_FOLDS = 3
A_BOUNDS = (0.0, 1.0)
U_MU_BOUNDS = (-1.0, 1.0)


@dataclass(frozen=True)
class UtilityParams:
    """Weights of the practice-utility definition: modality blend and mean offset."""

    a: float
    u_mu: float

    def __post_init__(self):
        if not A_BOUNDS[0] <= self.a <= A_BOUNDS[1]:
            raise ValueError(f"a={self.a} outside {A_BOUNDS}")
        if not U_MU_BOUNDS[0] <= self.u_mu <= U_MU_BOUNDS[1]:
            raise ValueError(f"u_mu={self.u_mu} outside {U_MU_BOUNDS}")


def utility(t: PracticeTuple, params: UtilityParams) -> float:
    """(1-a) * pitch improvement + a * timing improvement - u_mu."""
    return (
        (1.0 - params.a) * (t.p_pre - t.p_post)
        + params.a * (t.t_pre - t.t_post)
        - params.u_mu
    )


def build_training_set(dataset: Dataset, params: UtilityParams) -> tuple[np.ndarray, np.ndarray]:
    """Rows (p_pre, t_pre, pm, bpm); targets the observed utilities."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    x = np.array([[t.p_pre, t.t_pre, float(t.pm), t.bpm] for t in dataset])
    y = np.array([utility(t, params) for t in dataset])
    return x, y


@dataclass(frozen=True)
class Recommendation:
    chosen_pm: PracticeMode
    mean_pitch: float
    sd_pitch: float
    mean_timing: float
    sd_timing: float
    tie: bool

    @property
    def mean(self) -> float:
        return self.mean_timing if self.chosen_pm is PracticeMode.TIMING else self.mean_pitch

    @property
    def sd(self) -> float:
        return self.sd_timing if self.chosen_pm is PracticeMode.TIMING else self.sd_pitch


def _decide_batch(model: GPModel, p_pre, t_pre, bpm):
    """Predict both practice modes at each state and take the argmax.

    Pitch wins ties (|difference| < TIE_EPS). Returns
    (pm, mean_pitch, sd_pitch, mean_timing, sd_timing, tie) arrays.
    """
    p_pre = np.atleast_1d(np.asarray(p_pre, dtype=float))
    t_pre = np.atleast_1d(np.asarray(t_pre, dtype=float))
    bpm = np.broadcast_to(np.asarray(bpm, dtype=float), p_pre.shape)
    n = p_pre.shape[0]
    x = np.empty((2 * n, 4))
    for offset, pm_value in ((0, 0.0), (n, 1.0)):
        x[offset : offset + n, 0] = p_pre
        x[offset : offset + n, 1] = t_pre
        x[offset : offset + n, 2] = pm_value
        x[offset : offset + n, 3] = bpm
    mean, variance = predict_batch(model, x)
    sd = np.sqrt(variance)
    mean_pitch, mean_timing = mean[:n], mean[n:]
    delta = mean_timing - mean_pitch
    tie = np.abs(delta) < TIE_EPS
    pm = np.where(delta >= TIE_EPS, int(PracticeMode.TIMING), int(PracticeMode.PITCH))
    return pm, mean_pitch, sd[:n], mean_timing, sd[n:], tie


def recommend(model: GPModel, p_pre: float, t_pre: float, bpm: float) -> Recommendation:
    """Pick the practice mode with the larger predicted utility at this state."""
    pm, mp, sp, mt, st, tie = _decide_batch(model, [p_pre], [t_pre], [bpm])
    return Recommendation(
        chosen_pm=PracticeMode(int(pm[0])),
        mean_pitch=float(mp[0]),
        sd_pitch=float(sp[0]),
        mean_timing=float(mt[0]),
        sd_timing=float(st[0]),
        tie=bool(tie[0]),
    )


def policy_accuracy(model: GPModel, dataset: Dataset) -> float:
    """Fraction of tuples whose recommended mode matches the teacher's pick."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    p = np.array([t.p_pre for t in dataset])
    t_ = np.array([t.t_pre for t in dataset])
    b = np.array([t.bpm for t in dataset])
    teacher = np.array([int(t.pm) for t in dataset])
    pm, *_ = _decide_batch(model, p, t_, b)
    return float(np.mean(pm == teacher))


def _ei_values(mean: np.ndarray, variance: np.ndarray, f_best: float, xi: float) -> np.ndarray:
    sd = np.sqrt(variance)
    improve = mean - f_best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, improve / sd, 0.0)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    big_phi = 0.5 * (1.0 + erf(z / math.sqrt(2.0)))
    ei = np.where(sd > 0, improve * big_phi + sd * phi, 0.0)
    return np.maximum(ei, 0.0)


def expected_improvement(surrogate: GPModel, x: np.ndarray, f_best: float, xi: float = DEFAULT_XI) -> float:
    """EI of a candidate under the surrogate, relative to the incumbent best."""
    if xi < 0:
        raise ValueError("xi must be nonnegative")
    mean, variance = predict_batch(surrogate, np.asarray(x, dtype=float).reshape(1, -1))
    return float(_ei_values(mean, variance, f_best, xi)[0])


@dataclass(frozen=True)
class BOIteration:
    index: int
    a: float
    u_mu: float
    objective: float
    best_so_far: float
    acquisition: float | None = None  # None for initial-design points


@dataclass(frozen=True)
class BOTrace:
    iterations: tuple[BOIteration, ...]

    def best_index(self) -> int:
        return int(np.argmax([it.objective for it in self.iterations]))

    def to_csv(self) -> str:
        lines = ["iter,a,u_mu,objective,best"]
        for it in self.iterations:
            lines.append(
                f"{it.index},{it.a!r},{it.u_mu!r},{it.objective!r},{it.best_so_far!r}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PolicyMap:
    """Recommended practice mode over the (t_pre, p_pre) unit square at one tempo.

    Matrices are indexed [p_index][t_index]: rows follow the pitch-error grid,
    columns the timing-error grid.
    """

    bpm: float
    resolution: int
    t_grid: np.ndarray
    p_grid: np.ndarray
    chosen_pm: np.ndarray
    u_pitch: np.ndarray
    u_timing: np.ndarray
    sd_pitch: np.ndarray
    sd_timing: np.ndarray

    def timing_cell_count(self) -> int:
        return int((self.chosen_pm == int(PracticeMode.TIMING)).sum())

    def to_csv(self) -> str:
        lines = ["t_pre,p_pre,chosen_pm,u_pitch,u_timing,sd_pitch,sd_timing"]
        for pi, p in enumerate(self.p_grid):
            for ti, t in enumerate(self.t_grid):
                lines.append(
                    f"{float(t)!r},{float(p)!r},{int(self.chosen_pm[pi, ti])},"
                    f"{float(self.u_pitch[pi, ti])!r},{float(self.u_timing[pi, ti])!r},"
                    f"{float(self.sd_pitch[pi, ti])!r},{float(self.sd_timing[pi, ti])!r}"
                )
        return "\n".join(lines) + "\n"


def policy_map(model: GPModel, bpm: float, resolution: int = 41) -> PolicyMap:
    """Evaluate the recommendation rule over a uniform error grid at one tempo."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    grid = np.linspace(0.0, 1.0, resolution)
    tt, pp = np.meshgrid(grid, grid)  # row-major: [p_index, t_index]
    pm, mp, sp, mt, st, _ = _decide_batch(model, pp.ravel(), tt.ravel(), bpm)
    shape = (resolution, resolution)
    return PolicyMap(
        bpm=float(bpm),
        resolution=resolution,
        t_grid=grid,
        p_grid=grid.copy(),
        chosen_pm=pm.reshape(shape),
        u_pitch=mp.reshape(shape),
        u_timing=mt.reshape(shape),
        sd_pitch=sp.reshape(shape),
        sd_timing=st.reshape(shape),
    )


class ScaffoldResult(NamedTuple):
    params: UtilityParams
    model: GPModel
    trace: BOTrace


# ---------------------------------------------------------------------------
# Cross-validated objective, optionally evaluated in worker processes.
# A fold evaluation fits a full GP, which holds the GIL for a large share of
# its runtime, so threads do not overlap; processes do. Workers receive the
# fold data once (via the pool initializer) and then only (fold, a, u_mu)
# triples per task.

_WORKER_FOLDS: "_FoldData | None" = None


@dataclass(frozen=True)
class _FoldData:
    family: Family
    seed: int
    train_subsets: tuple[Dataset, ...]
    val_state: tuple[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray], ...]


def _eval_fold(folds: _FoldData, fold_index: int, params: UtilityParams) -> float:
    x, y = build_training_set(folds.train_subsets[fold_index], params)
    model = fit(
        x,
        y,
        folds.family,
        seed=_fit_seed(folds.seed, fold_index),
        standardize_mask=STANDARDIZE_MASK,
    )
    val_p, val_t, val_b, val_pm = folds.val_state[fold_index]
    pm, *_ = _decide_batch(model, val_p, val_t, val_b)
    return float(np.mean(pm == val_pm))


def _init_worker(folds: _FoldData) -> None:
    global _WORKER_FOLDS
    _WORKER_FOLDS = folds
    from .gp.model import single_threaded_blas as _stb

    # keep the limiter alive for the worker's lifetime
    _init_worker._guard = _stb()
    _init_worker._guard.__enter__()


def _worker_eval(task: tuple[int, float, float]) -> float:
    fold_index, a, u_mu = task
    return _eval_fold(_WORKER_FOLDS, fold_index, UtilityParams(a, u_mu))


def _fold_assignment(dataset: Dataset, rng: np.random.Generator) -> np.ndarray:
    """Stratified-by-mode fold labels in {0..N_FOLDS-1}."""
    labels = np.empty(len(dataset), dtype=int)
    for mode in PracticeMode:
        idx = np.array([i for i, t in enumerate(dataset.tuples) if t.pm is mode], dtype=int)
        idx = idx[rng.permutation(len(idx))]
        labels[idx] = np.arange(len(idx)) % N_FOLDS
    return labels


def _latin_hypercube(rng: np.random.Generator, n: int) -> np.ndarray:
    """n stratified samples of (a, u_mu) over the search box."""
    out = np.empty((n, 2))
    for dim, (lo, hi) in enumerate((A_BOUNDS, U_MU_BOUNDS)):
        cells = rng.permutation(n)
        jitter = rng.uniform(size=n)
        out[:, dim] = lo + (cells + jitter) / n * (hi - lo)
    return out


def _fit_seed(seed: int, salt: int) -> int:
    return (seed * 1_000_003 + salt) % (2**63)


def optimize_scaffold(
    dataset: Dataset,
    family: Family,
    budget: int,
    seed: int,
    xi: float = DEFAULT_XI,
    progress: Callable[[int, int], None] | None = None,
    n_jobs: int | None = None,
) -> ScaffoldResult:
    """Search utility weights by Bayesian optimization of teacher agreement.

    The objective for a candidate (a, u_mu) is 3-fold cross-validated policy
    accuracy on `dataset`, refitting the GP (kernel hyperparameters included)
    per fold. After a Latin-hypercube initial design, each iteration fits a
    Matern-5/2 surrogate to all evaluations and takes the expected-improvement
    argmax over a 101x101 grid, skipping already-evaluated points. The final
    model is refit on the full dataset at the best weights found.

    Deterministic for fixed (dataset, family, budget, seed, backend).
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if not dataset.has_both_modes():
        raise DegenerateDatasetError(
            "both practice modes are needed to train a policy; "
            "the dataset contains only one"
        )

    rng = np.random.default_rng(seed)
    folds = _fold_assignment(dataset, rng)
    fold_sets = []
    for f in range(N_FOLDS):
        train_idx = np.flatnonzero(folds != f)
        val_idx = np.flatnonzero(folds == f)
        if len(train_idx) == 0 or len(val_idx) == 0:
            raise DegenerateDatasetError("dataset too small for 3-fold cross-validation")
        fold_sets.append((train_idx, val_idx))

    tuples = dataset.tuples
    train_subsets = []
    val_state = []
    for train_idx, val_idx in fold_sets:
        train_subsets.append(
            Dataset(tuples=tuple(tuples[i] for i in train_idx), provenance=dataset.provenance)
        )
        val_state.append(
            (
                np.array([tuples[i].p_pre for i in val_idx]),
                np.array([tuples[i].t_pre for i in val_idx]),
                np.array([tuples[i].bpm for i in val_idx]),
                np.array([int(tuples[i].pm) for i in val_idx]),
            )
        )
    folds = _FoldData(
        family=family,
        seed=seed,
        train_subsets=tuple(train_subsets),
        val_state=tuple(val_state),
    )

    workers = n_jobs if n_jobs is not None else min(N_FOLDS, os.cpu_count() or 1)
    if len(dataset) < 60:
        workers = 1  # pool startup would dominate on small fits
    pool = None
    if workers > 1:
        # spawn (not fork): training may run on a service worker thread, and
        # forking a threaded process that holds BLAS locks can deadlock
        pool = ProcessPoolExecutor(
            max_workers=workers,
            mp_context=multiprocessing.get_context("spawn"),
            initializer=_init_worker,
            initargs=(folds,),
        )
    cache: dict[tuple[float, float], float] = {}

    def objective(params: UtilityParams) -> float:
        key = (params.a, params.u_mu)
        if key not in cache:
            if pool is not None:
                tasks = [(f, params.a, params.u_mu) for f in range(N_FOLDS)]
                accs = list(pool.map(_worker_eval, tasks))
            else:
                accs = [_eval_fold(folds, f, params) for f in range(N_FOLDS)]
            cache[key] = float(np.mean(accs))
        return cache[key]

    iterations: list[BOIteration] = []
    best_so_far = -math.inf

    def record(a: float, u_mu: float, value: float, acquisition: float | None):
        nonlocal best_so_far
        best_so_far = max(best_so_far, value)
        iterations.append(
            BOIteration(
                index=len(iterations),
                a=a,
                u_mu=u_mu,
                objective=value,
                best_so_far=best_so_far,
                acquisition=acquisition,
            )
        )

    try:
        with single_threaded_blas():
            for a, u_mu in _latin_hypercube(rng, N_INITIAL_DESIGN):
                record(float(a), float(u_mu), objective(UtilityParams(float(a), float(u_mu))), None)

            a_grid = np.linspace(*A_BOUNDS, EI_GRID_SIZE)
            u_grid = np.linspace(*U_MU_BOUNDS, EI_GRID_SIZE)
            aa, uu = np.meshgrid(a_grid, u_grid)
            candidates = np.column_stack([aa.ravel(), uu.ravel()])

            for iteration in range(budget):
                x_seen = np.array([[it.a, it.u_mu] for it in iterations])
                y_seen = np.array([it.objective for it in iterations])
                surrogate = fit(
                    x_seen,
                    y_seen,
                    Family.MATERN52,
                    seed=_fit_seed(seed, 7_777 + iteration),
                    standardize_mask=np.array([True, True]),
                )
                mean, variance = predict_batch(surrogate, candidates)
                ei = _ei_values(mean, variance, float(y_seen.max()), xi)
                evaluated = {(it.a, it.u_mu) for it in iterations}
                for flat in range(ei.shape[0]):
                    if (candidates[flat, 0], candidates[flat, 1]) in evaluated:
                        ei[flat] = -1.0
                pick = int(np.argmax(ei))
                a, u_mu = float(candidates[pick, 0]), float(candidates[pick, 1])
                value = objective(UtilityParams(a, u_mu))
                record(a, u_mu, value, float(max(ei[pick], 0.0)))
                if progress is not None:
                    progress(iteration + 1, budget)

            trace = BOTrace(iterations=tuple(iterations))
            best = trace.iterations[trace.best_index()]
            best_params = UtilityParams(best.a, best.u_mu)
            x, y = build_training_set(dataset, best_params)
            final_model = fit(
                x, y, family, seed=_fit_seed(seed, 999_983), standardize_mask=STANDARDIZE_MASK
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return ScaffoldResult(params=best_params, model=final_model, trace=trace)
