"""Synthetic expert-learner sessions with a planted teacher rule.

The learner improves multiplicatively in the practiced modality (with a
small spillover to the other) plus Gaussian noise; the teacher picks the
practice mode from the pre-practice errors by a configurable rule. Because
the rule is known, datasets from here carry exact ground truth for tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .baselines import REFERENCE_RULE_COEFFS, REFERENCE_RULE_THRESHOLD
from .dataset import Dataset, PracticeMode, PracticeTuple, Provenance

SESSION_DONE_THRESHOLD = 0.05
INITIAL_ERROR_RANGE = (0.05, 0.9)


class RuleKind(enum.Enum):
    LOGISTIC = "logistic"
    ALWAYS = "always"


@dataclass(frozen=True)
class TeacherRule:
    """Maps a pre-practice error state to the practice mode a teacher would pick."""

    kind: RuleKind
    coefficients: tuple[float, float, float] | None = None  # (intercept, b_t, b_p)
    fixed_pm: PracticeMode | None = None

    def __post_init__(self):
        if self.kind is RuleKind.LOGISTIC and (
            self.coefficients is None or len(self.coefficients) != 3
        ):
            raise ValueError("logistic rule needs (intercept, b_t, b_p)")
        if self.kind is RuleKind.ALWAYS and self.fixed_pm is None:
            raise ValueError("constant rule needs a practice mode")

    @classmethod
    def reference(cls) -> "TeacherRule":
        return cls(kind=RuleKind.LOGISTIC, coefficients=REFERENCE_RULE_COEFFS)

    @classmethod
    def always(cls, pm: PracticeMode) -> "TeacherRule":
        return cls(kind=RuleKind.ALWAYS, fixed_pm=pm)

    def decide(self, t_pre: float, p_pre: float) -> PracticeMode:
        if self.kind is RuleKind.ALWAYS:
            return self.fixed_pm
        intercept, b_t, b_p = self.coefficients
        score = intercept + b_t * t_pre + b_p * p_pre
        return PracticeMode.TIMING if score > REFERENCE_RULE_THRESHOLD else PracticeMode.PITCH


@dataclass(frozen=True)
class LearnerState:
    pitch_err: float
    timing_err: float

    def __post_init__(self):
        if not 0.0 <= self.pitch_err <= 1.0 or not 0.0 <= self.timing_err <= 1.0:
            raise ValueError("errors must lie in [0, 1]")

    def done(self) -> bool:
        return (
            self.pitch_err < SESSION_DONE_THRESHOLD
            and self.timing_err < SESSION_DONE_THRESHOLD
        )


@dataclass(frozen=True)
class ImprovementModel:
    """Fractional error reduction per practice unit.

    `direct_gain` applies to the practiced modality, `transfer_gain` to the
    other; Gaussian noise with `noise_sd` is added to both before clamping.

    The defaults keep sessions short (2-4 units), so most pre-practice states
    are fresh uniform draws and both practice modes stay well represented;
    planted-rule recovery is then well posed for the policy model.
    """

    direct_gain: float = 0.97
    transfer_gain: float = 0.25
    noise_sd: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.direct_gain < 1.0:
            raise ValueError("direct_gain must lie in (0, 1)")
        if not 0.0 <= self.transfer_gain < 1.0:
            raise ValueError("transfer_gain must lie in [0, 1)")
        if self.direct_gain <= self.transfer_gain:
            raise ValueError("direct_gain must exceed transfer_gain")
        if self.noise_sd < 0.0:
            raise ValueError("noise_sd must be nonnegative")


def learner_step(
    state: LearnerState,
    pm: PracticeMode,
    model: ImprovementModel,
    rng: np.random.Generator,
) -> LearnerState:
    """One practice unit: shrink the practiced error, slightly shrink the other.

    Draws two noise samples from `rng` (practiced modality first), so a fixed
    generator state reproduces the trajectory exactly.
    """
    eps_direct = rng.normal(0.0, model.noise_sd) if model.noise_sd > 0 else 0.0
    eps_other = rng.normal(0.0, model.noise_sd) if model.noise_sd > 0 else 0.0

    def clamp(v: float) -> float:
        return min(max(v, 0.0), 1.0)

    if pm is PracticeMode.TIMING:
        timing = clamp(state.timing_err * (1.0 - model.direct_gain) + eps_direct)
        pitch = clamp(state.pitch_err * (1.0 - model.transfer_gain) + eps_other)
    else:
        pitch = clamp(state.pitch_err * (1.0 - model.direct_gain) + eps_direct)
        timing = clamp(state.timing_err * (1.0 - model.transfer_gain) + eps_other)
    return LearnerState(pitch_err=pitch, timing_err=timing)


def simulate_dataset(
    rule: TeacherRule,
    model: ImprovementModel,
    n: int,
    bpm_choices: tuple[float, ...] = (50.0, 80.0, 100.0),
    seed: int = 0,
) -> Dataset:
    """Generate `n` practice tuples across simulated sessions.

    A session starts at a uniform-random error state and ends (resetting to a
    fresh state) once both errors drop below the done threshold.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    choices = tuple(sorted(bpm_choices))
    tuples = []
    session = 0
    state = None
    for _ in range(n):
        if state is None or state.done():
            lo, hi = INITIAL_ERROR_RANGE
            state = LearnerState(
                pitch_err=float(rng.uniform(lo, hi)), timing_err=float(rng.uniform(lo, hi))
            )
            session += 1
        pm = rule.decide(state.timing_err, state.pitch_err)
        bpm = float(choices[rng.integers(0, len(choices))])
        post = learner_step(state, pm, model, rng)
        tuples.append(
            PracticeTuple(
                subject_id=f"s{session:03d}",
                piece_id=f"piece{session:03d}",
                p_pre=state.pitch_err,
                t_pre=state.timing_err,
                pm=pm,
                bpm=bpm,
                p_post=post.pitch_err,
                t_post=post.timing_err,
            )
        )
        state = post
    return Dataset(tuples=tuple(tuples), provenance=Provenance.SYNTHETIC)
