"""Score document (de)serialization.

A score is a JSON object:

    {"schema": 1,
     "piece_id": "twinkle",
     "notes": [{"pitch": 60, "onset_beats": 0.0, "duration_beats": 1.0}, ...]}

Notes may appear in any order; they are sorted by onset on load. Two notes
with the same (pitch, onset) are rejected as duplicates.
"""

from __future__ import annotations

import json

from ..errors import ScoreValidationError
from .types import Note, Score

SCORE_SCHEMA_VERSION = 1


def _require(obj: dict, field: str, kind, where: str):
    if field not in obj:
        raise ScoreValidationError(f"missing field in {where}", field)
    value = obj[field]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ScoreValidationError(f"{where} has wrong type for", field)
    return value


def parse_score(text: str) -> Score:
    """Parse and validate a score document; raises ScoreValidationError."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScoreValidationError(f"not valid JSON: {exc}", "document") from exc
    if not isinstance(doc, dict):
        raise ScoreValidationError("document must be an object", "document")
    schema = _require(doc, "schema", int, "document")
    if schema != SCORE_SCHEMA_VERSION:
        raise ScoreValidationError(f"unsupported schema version {schema}", "schema")
    piece_id = _require(doc, "piece_id", str, "document")
    raw_notes = _require(doc, "notes", list, "document")
    if not raw_notes:
        raise ScoreValidationError("score must contain at least one note", "notes")

    notes = []
    seen: set[tuple[int, float]] = set()
    for i, raw in enumerate(raw_notes):
        if not isinstance(raw, dict):
            raise ScoreValidationError(f"notes[{i}] must be an object", "notes")
        pitch = _require(raw, "pitch", int, f"notes[{i}]")
        onset = _require(raw, "onset_beats", float, f"notes[{i}]")
        duration = _require(raw, "duration_beats", float, f"notes[{i}]")
        try:
            note = Note(pitch=pitch, onset_beats=onset, duration_beats=duration)
        except ValueError as exc:
            field = str(exc).split(" ")[0]
            raise ScoreValidationError(f"notes[{i}]: {exc}", field) from exc
        if (pitch, onset) in seen:
            raise ScoreValidationError(f"notes[{i}] duplicates (pitch, onset) ({pitch}, {onset})", "notes")
        seen.add((pitch, onset))
        notes.append(note)

    notes.sort(key=lambda n: (n.onset_beats, n.pitch))
    return Score(notes=tuple(notes), piece_id=piece_id)


def score_to_json(score: Score) -> str:
    """Serialize a Score back to its document form (round-trips exactly)."""
    doc = {
        "schema": SCORE_SCHEMA_VERSION,
        "piece_id": score.piece_id,
        "notes": [
            {"pitch": n.pitch, "onset_beats": n.onset_beats, "duration_beats": n.duration_beats}
            for n in score.notes
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
