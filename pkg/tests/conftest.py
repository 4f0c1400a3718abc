import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from practicegp.dataset import Dataset, PracticeMode, PracticeTuple
from practicegp.score_perf import Note, PerformanceTrack, Score
from practicegp.simulator import ImprovementModel, TeacherRule, simulate_dataset


@pytest.fixture
def quarter_score() -> Score:
    """Four quarter notes C4 D4 E4 F4 on beats 0..3."""
    return Score(
        notes=tuple(
            Note(pitch=60 + step, onset_beats=float(beat), duration_beats=1.0)
            for beat, step in enumerate((0, 2, 4, 5))
        ),
        piece_id="scale4",
    )


def performance_from_beats(beats_and_pitches, bpm=120.0) -> PerformanceTrack:
    """Build a performance whose events sit at the given (pitch, beat) points."""
    seconds_per_beat = 60.0 / bpm
    events = tuple((pitch, beat * seconds_per_beat) for pitch, beat in beats_and_pitches)
    return PerformanceTrack(events=events, bpm=bpm)


def perfect_performance(score: Score, bpm=120.0) -> PerformanceTrack:
    return performance_from_beats([(n.pitch, n.onset_beats) for n in score.notes], bpm=bpm)


@pytest.fixture
def sim_dataset() -> Dataset:
    return simulate_dataset(TeacherRule.reference(), ImprovementModel(), 40, seed=3)


def make_tuple(p_pre=0.4, t_pre=0.3, pm=PracticeMode.PITCH, bpm=80.0, p_post=0.2, t_post=0.25):
    return PracticeTuple(
        subject_id="s",
        piece_id="p",
        p_pre=p_pre,
        t_pre=t_pre,
        pm=pm,
        bpm=bpm,
        p_post=p_post,
        t_post=t_post,
    )


def random_alignment_fixture(rng: np.random.Generator):
    """A random score plus a consistent random alignment over it.

    Returns (score, alignment); used by feature-oracle tests that compare the
    implementation against the brute-force oracle on the same alignment.
    """
    from practicegp.score_perf import AlignedNote, Alignment

    n_notes = int(rng.integers(1, 12))
    notes = []
    onset = 0.0
    for _ in range(n_notes):
        duration = float(rng.choice([0.5, 1.0, 2.0]))
        notes.append(Note(pitch=int(rng.integers(40, 90)), onset_beats=onset, duration_beats=duration))
        onset += duration
    score = Score(notes=tuple(notes), piece_id="rand")

    pairs = []
    missed = set()
    perf_index = 0
    for score_index in range(n_notes):
        if rng.random() < 0.25:
            missed.add(score_index)
            continue
        pairs.append(
            AlignedNote(
                score_index=score_index,
                perf_index=perf_index,
                pitch_correct=bool(rng.random() < 0.8),
                offset_beats=float(rng.uniform(0.0, 1.6)),
            )
        )
        perf_index += 1
    extra = frozenset(
        range(perf_index, perf_index + int(rng.integers(0, 3)))
    )
    alignment = Alignment(pairs=tuple(pairs), missed=frozenset(missed), extra=extra)
    return score, alignment
