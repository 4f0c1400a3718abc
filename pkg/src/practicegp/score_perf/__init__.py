"""Score/performance ingestion and error features."""

from .align import DEFAULT_WINDOW_BEATS, align
from .features import PerformanceErrors, evaluate_performance, pitch_error, timing_error
from .score_io import parse_score, score_to_json
from .smf import build_smf, parse_smf
from .types import AlignedNote, Alignment, Note, PerformanceTrack, Score

__all__ = [
    "AlignedNote",
    "Alignment",
    "DEFAULT_WINDOW_BEATS",
    "Note",
    "PerformanceErrors",
    "PerformanceTrack",
    "Score",
    "align",
    "build_smf",
    "evaluate_performance",
    "parse_score",
    "parse_smf",
    "pitch_error",
    "score_to_json",
    "timing_error",
]
