"""Error features of a performance against its reference score.

Pitch error is the duration-weighted fraction of score notes whose pitch was
wrong or missing. Timing error is the mean onset offset over matched notes,
with each offset capped at one beat. Both live in [0, 1].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from ..errors import NoMatchedNotesWarning
from .align import align
from .types import Alignment, PerformanceTrack, Score


def pitch_error(score: Score, alignment: Alignment) -> float:
    """Duration-weighted wrong-pitch fraction over all score notes.

    Missed notes count as wrong; extra played notes are ignored.
    """
    wrong_by_index = {p.score_index: not p.pitch_correct for p in alignment.pairs}
    weighted_wrong = 0.0
    total = 0.0
    for i, note in enumerate(score.notes):
        wrong = wrong_by_index.get(i, True)  # unmatched -> missed -> wrong
        total += note.duration_beats
        if wrong:
            weighted_wrong += note.duration_beats
    return weighted_wrong / total


def timing_error(alignment: Alignment) -> float:
    """Mean capped onset offset over matched notes; 1.0 when nothing matched."""
    if not alignment.pairs:
        warnings.warn("alignment has no matched notes", NoMatchedNotesWarning, stacklevel=2)
        return 1.0
    total = 0.0
    for pair in alignment.pairs:
        total += min(1.0, pair.offset_beats)
    return total / len(alignment.pairs)


@dataclass(frozen=True)
class PerformanceErrors:
    pitch: float
    timing: float
    no_matched_notes: bool = False


def evaluate_performance(score: Score, perf: PerformanceTrack, **align_kwargs) -> PerformanceErrors:
    """Align and score a performance in one step."""
    alignment = align(score, perf, **align_kwargs)
    no_matches = not alignment.pairs
    with warnings.catch_warnings():
        if no_matches:
            warnings.simplefilter("ignore", NoMatchedNotesWarning)
        t_err = timing_error(alignment)
    return PerformanceErrors(
        pitch=pitch_error(score, alignment), timing=t_err, no_matched_notes=no_matches
    )
