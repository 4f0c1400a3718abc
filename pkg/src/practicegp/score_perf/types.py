"""Core music objects: reference scores, recorded performances, alignments."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Note:
    """One score note: MIDI pitch plus metric position and length in beats."""

    pitch: int
    onset_beats: float
    duration_beats: float

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside [0, 127]")
        if self.onset_beats < 0:
            raise ValueError(f"onset_beats {self.onset_beats} is negative")
        if self.duration_beats <= 0:
            raise ValueError(f"duration_beats {self.duration_beats} must be positive")


@dataclass(frozen=True)
class Score:
    """Reference piece: notes sorted by onset."""

    notes: tuple[Note, ...]
    piece_id: str = ""

    def __post_init__(self):
        if len(self.notes) < 1:
            raise ValueError("a score needs at least one note")
        onsets = [n.onset_beats for n in self.notes]
        if any(b < a for a, b in zip(onsets, onsets[1:])):
            raise ValueError("score notes must be sorted by onset")

    def __len__(self) -> int:
        return len(self.notes)


@dataclass(frozen=True)
class PerformanceTrack:
    """Played notes as (pitch, onset in seconds), with the trial's metronome tempo."""

    events: tuple[tuple[int, float], ...]
    bpm: float = 120.0

    def __post_init__(self):
        if self.bpm <= 0:
            raise ValueError(f"bpm {self.bpm} must be positive")
        onsets = [t for _, t in self.events]
        if any(t < 0 for t in onsets):
            raise ValueError("event onsets must be nonnegative")
        if any(b < a for a, b in zip(onsets, onsets[1:])):
            raise ValueError("events must be sorted by onset")


@dataclass(frozen=True)
class AlignedNote:
    """A score note matched to a played event."""

    score_index: int
    perf_index: int
    pitch_correct: bool
    offset_beats: float  # absolute onset offset, always >= 0

    def __post_init__(self):
        if self.offset_beats < 0:
            raise ValueError("offset_beats must be nonnegative")


@dataclass(frozen=True)
class Alignment:
    """Monotone matching between score notes and performance events.

    Score notes with no partner are `missed`; performance events with no
    partner are `extra`. Every index appears in at most one pair.
    """

    pairs: tuple[AlignedNote, ...]
    missed: frozenset[int] = field(default_factory=frozenset)
    extra: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        score_idx = [p.score_index for p in self.pairs]
        perf_idx = [p.perf_index for p in self.pairs]
        if len(set(score_idx)) != len(score_idx) or len(set(perf_idx)) != len(perf_idx):
            raise ValueError("an index may appear in at most one pair")
        if any(b <= a for a, b in zip(score_idx, score_idx[1:])):
            raise ValueError("pairs must be monotone in score index")
        if any(b <= a for a, b in zip(perf_idx, perf_idx[1:])):
            raise ValueError("pairs must be monotone in performance index")
        if set(score_idx) & self.missed:
            raise ValueError("a score index cannot be both paired and missed")
        if set(perf_idx) & self.extra:
            raise ValueError("a performance index cannot be both paired and extra")
