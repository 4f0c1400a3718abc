"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. A3 performs the full
Bayesian-optimization budget twice (once timed, once for the determinism
claim), so this module takes several minutes.
"""

import time
import warnings

import numpy as np
import pytest

import invariant_checks
from conftest import random_alignment_fixture
from oracles import (
    gp_predict_brute,
    lml_brute,
    matern52_kernel_fn,
    pitch_error_brute,
    ratquad_kernel_fn,
    rbf_kernel_fn,
    timing_error_brute,
)
from practicegp.dataset import load_external_dataset, split
from practicegp.gp import (
    Family,
    KernelSpec,
    from_hyperparameters,
    gram,
    log_marginal_likelihood,
    predict,
    predict_batch,
    to_json,
)
from practicegp.policy import optimize_scaffold, policy_accuracy, policy_map
from practicegp.score_perf import pitch_error, timing_error
from practicegp.simulator import ImprovementModel, TeacherRule, simulate_dataset

A3_DATA_SEED = 42
A3_SPLIT_SEED = 7
A3_BO_SEED = 11
A3_BUDGET = 50
A3_RUNTIME_LIMIT_S = 300.0

external_dataset = load_external_dataset()


@pytest.fixture(scope="module")
def a3_run():
    data = simulate_dataset(
        TeacherRule.reference(), ImprovementModel(), 300, seed=A3_DATA_SEED
    )
    train, test = split(data, 1.0 / 3.0, seed=A3_SPLIT_SEED)
    assert (len(train), len(test)) == (200, 100)
    started = time.perf_counter()
    result = optimize_scaffold(train, Family.RATQUAD, budget=A3_BUDGET, seed=A3_BO_SEED)
    runtime = time.perf_counter() - started
    return train, test, result, runtime


def test_a1_feature_oracles():
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(20):
            score, alignment = random_alignment_fixture(rng)
            assert pitch_error(score, alignment) == pitch_error_brute(score, alignment)
            assert timing_error(alignment) == timing_error_brute(alignment)
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    print(f"\n[A1] PASS: 20 fixtures match the brute-force oracles exactly ({elapsed:.3f}s)")


def test_a2_gp_correctness():
    rng = np.random.default_rng(88)

    # (a) zero-noise interpolation on N=15 random (separated) points
    points = []
    while len(points) < 15:
        candidate = rng.uniform(-2, 2, size=2)
        if all(np.linalg.norm(candidate - p) > 0.35 for p in points):
            points.append(candidate)
    x = np.array(points)
    spec = KernelSpec(family=Family.RBF, variance=1.0, lengthscales=(1.0, 1.0))
    K = gram(spec, x) + 1e-10 * np.eye(15)
    y = np.linalg.cholesky(K) @ rng.normal(size=15)
    model = from_hyperparameters(spec, 0.0, x, y)
    mean, _ = predict_batch(model, x)
    residual = float(np.abs(mean - y).max())
    assert residual < 1e-6

    # (b) N=2 predictive mean/variance against the explicit 2x2 closed form
    worst_gap = 0.0
    for family, kernel_fn in (
        (Family.RBF, rbf_kernel_fn(1.2, (0.8, 1.3))),
        (Family.RATQUAD, ratquad_kernel_fn(1.2, (0.8, 1.3), 2.5)),
        (Family.MATERN52, matern52_kernel_fn(1.2, (0.8, 1.3))),
    ):
        spec2 = KernelSpec(
            family=family,
            variance=1.2,
            lengthscales=(0.8, 1.3),
            alpha=2.5 if family is Family.RATQUAD else None,
        )
        x2 = rng.normal(size=(2, 2))
        y2 = rng.normal(size=2)
        model2 = from_hyperparameters(spec2, 0.07, x2, y2)
        query = rng.normal(size=2)
        mean2, var2 = predict(model2, query)
        mean_b, var_b = gp_predict_brute(kernel_fn, x2, y2, 0.07 + 1e-8, query)
        worst_gap = max(worst_gap, abs(mean2 - mean_b), abs(var2 - (var_b - 1e-8)))
    assert worst_gap < 1e-10

    # (c) Cholesky LML equals explicit-inverse LML for N <= 5
    worst_lml = 0.0
    for n in (2, 3, 5):
        xs = rng.normal(size=(n, 2))
        ys = rng.normal(size=n)
        ours = log_marginal_likelihood(spec, 0.05, xs, ys)
        brute = lml_brute(rbf_kernel_fn(1.0, (1.0, 1.0)), xs, ys, 0.05 + 1e-8)
        worst_lml = max(worst_lml, abs(ours - brute))
    assert worst_lml < 1e-8

    # (d) RatQuad at alpha=1e6 vs RBF
    grid = rng.uniform(-1, 1, size=(50, 2))
    rq = KernelSpec(family=Family.RATQUAD, variance=1.0, lengthscales=(1.0, 1.0), alpha=1e6)
    rbf = KernelSpec(family=Family.RBF, variance=1.0, lengthscales=(1.0, 1.0))
    gap = float(np.abs(gram(rq, grid) - gram(rbf, grid)).max())
    assert gap < 1e-3

    print(
        f"\n[A2] PASS: interpolation residual {residual:.2e}; 2x2 oracle gap {worst_gap:.2e}; "
        f"LML gap {worst_lml:.2e}; RatQuad-RBF gap {gap:.2e}"
    )


def test_a3_synthetic_policy_recovery(a3_run):
    train, test, result, runtime = a3_run
    accuracy = policy_accuracy(result.model, test)
    best = result.trace.iterations[result.trace.best_index()]
    assert accuracy >= 0.85, f"test accuracy {accuracy:.3f} below 0.85"
    assert runtime < A3_RUNTIME_LIMIT_S, f"runtime {runtime:.0f}s exceeds {A3_RUNTIME_LIMIT_S}s"
    print(
        f"\n[A3] PASS: test accuracy {accuracy:.3f} (>= 0.85) with a={result.params.a:.3f}, "
        f"u_mu={result.params.u_mu:.3f}, cv accuracy {best.objective:.3f}, "
        f"runtime {runtime:.0f}s (< {A3_RUNTIME_LIMIT_S:.0f}s)"
    )


def test_a3_deterministic_rerun(a3_run):
    train, _, result, _ = a3_run
    rerun = optimize_scaffold(train, Family.RATQUAD, budget=A3_BUDGET, seed=A3_BO_SEED)
    assert rerun.params == result.params
    assert rerun.trace == result.trace
    assert to_json(rerun.model) == to_json(result.model)
    print("\n[A3] PASS: rerun with the same seed reproduced the trace and model bit-for-bit")


@pytest.mark.skipif(
    external_dataset is None,
    reason=(
        "A4 SKIPPED: the externally recorded dataset (121 tuples) is not available in this "
        "environment; per the acceptance criteria A4 is replaced by A3 plus A5. Place the "
        "canonical CSV at $PRACTICEGP_EXTERNAL_DATA to enable this criterion."
    ),
)
def test_a4_recorded_data_reproduction():
    from practicegp.baselines import evaluation_report

    data = external_dataset
    train, test = split(data, 0.2, seed=A3_SPLIT_SEED)
    result = optimize_scaffold(train, Family.RATQUAD, budget=A3_BUDGET, seed=A3_BO_SEED)
    accuracy = policy_accuracy(result.model, test)
    assert 0.60 <= accuracy <= 0.80

    best_curve = [it.best_so_far for it in result.trace.iterations]
    assert best_curve == sorted(best_curve)

    report = evaluation_report(train, test)
    r2 = report["linear"]["r_squared_at_best_a"]
    assert abs(r2 - 0.357) <= 0.05
    grid_acc = report["linear"]["grid_accuracy_at_best"]
    assert abs(grid_acc - 0.380) <= 0.05
    assert any(lo <= 0.0 <= hi for lo, hi in report["linear"]["best_a_interval"])
    assert abs(report["accuracy_in_sample"]["logistic"] - 0.694) <= 0.03
    assert abs(report["accuracy_in_sample"]["logistic_bpm"] - 0.702) <= 0.03
    print(f"\n[A4] PASS: GP accuracy {accuracy:.3f}, linear R2 {r2:.3f}")


def test_a4_substitution_notice():
    if external_dataset is not None:
        pytest.skip("external dataset present; the full A4 criterion runs instead")
    print(
        "\n[A4] SUBSTITUTED: external recorded dataset unavailable in this environment; "
        "criterion replaced by A3 (synthetic recovery) plus A5 (property suites) as the "
        "acceptance criteria prescribe. The published accuracy/R2 figures are not "
        "desk-reproducible without that data."
    )


def test_a5_property_suites():
    failures = []
    for name in sorted(invariant_checks.CHECKS):
        try:
            invariant_checks.CHECKS[name]()
        except AssertionError as exc:
            failures.append((name, exc))
    assert not failures, failures
    print(f"\n[A5] PASS: all {len(invariant_checks.CHECKS)} documented invariants exercised and green")


def test_a6_policy_map_tempo_trend(a3_run):
    _, _, result, _ = a3_run
    slow = policy_map(result.model, bpm=50.0, resolution=41)
    fast = policy_map(result.model, bpm=100.0, resolution=41)
    for grid in (slow, fast):
        delta = grid.u_timing - grid.u_pitch
        assert np.array_equal(grid.chosen_pm, (delta >= 1e-12).astype(int))
    slow_cells, fast_cells = slow.timing_cell_count(), fast.timing_cell_count()
    if external_dataset is not None:
        assert fast_cells <= slow_cells
        print(f"\n[A6] PASS: timing region shrinks with tempo ({slow_cells} -> {fast_cells} cells)")
    else:
        print(
            f"\n[A6] PASS (informational on synthetic data; binding only on recorded data): "
            f"timing-recommended cells at BPM 50: {slow_cells}, at BPM 100: {fast_cells} "
            f"of {41 * 41}; the planted teacher ignores tempo, so no trend is required"
        )
