"""Score-to-performance alignment.

Performance onsets are converted to beats at the trial tempo and anchored so
the first played event lands on the first score note's nominal onset (the
metronome count-in makes this a stable reference). Matching is then greedy
and monotone: walking the score in order, each note takes the best unmatched
event inside the onset window, preferring an event with the right pitch,
otherwise the nearest onset.
"""

from __future__ import annotations

import statistics

from .types import AlignedNote, Alignment, PerformanceTrack, Score

DEFAULT_WINDOW_BEATS = 0.5
_EPS = 1e-9


def _performance_beats(score: Score, perf: PerformanceTrack, anchor: str) -> list[float]:
    beats_per_second = perf.bpm / 60.0
    raw = [t * beats_per_second for _, t in perf.events]
    if not raw:
        return []
    if anchor == "first":
        shift = score.notes[0].onset_beats - raw[0]
    elif anchor == "median":
        paired = [score.notes[min(i, len(score) - 1)].onset_beats - b for i, b in enumerate(raw)]
        shift = statistics.median(paired)
    else:
        raise ValueError(f"unknown anchor mode {anchor!r}")
    return [b + shift for b in raw]


def align(
    score: Score,
    perf: PerformanceTrack,
    window_beats: float = DEFAULT_WINDOW_BEATS,
    anchor: str = "first",
) -> Alignment:
    """Match performance events to score notes; never raises on sparse input.

    An empty performance yields an all-missed alignment.
    """
    beats = _performance_beats(score, perf, anchor)
    pitches = [p for p, _ in perf.events]

    pairs: list[AlignedNote] = []
    last_perf = -1
    missed: set[int] = set()
    for si, note in enumerate(score.notes):
        best = None  # (offset, perf index)
        best_pitch_match = False
        for pi in range(last_perf + 1, len(beats)):
            offset = abs(beats[pi] - note.onset_beats)
            if offset > window_beats + _EPS:
                continue
            pitch_match = pitches[pi] == note.pitch
            if pitch_match and not best_pitch_match:
                best, best_pitch_match = (offset, pi), True
            elif pitch_match == best_pitch_match and (best is None or offset < best[0] - _EPS):
                best = (offset, pi)
        if best is None:
            missed.add(si)
            continue
        offset, pi = best
        pairs.append(
            AlignedNote(
                score_index=si,
                perf_index=pi,
                pitch_correct=pitches[pi] == note.pitch,
                offset_beats=offset,
            )
        )
        last_perf = pi

    matched_perf = {p.perf_index for p in pairs}
    extra = frozenset(i for i in range(len(beats)) if i not in matched_perf)
    return Alignment(pairs=tuple(pairs), missed=frozenset(missed), extra=extra)
