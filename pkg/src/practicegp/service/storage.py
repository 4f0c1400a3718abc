"""File-backed persistence for the practice service.

Sessions are append-only JSONL event logs (one file per session); the
recorded practice-tuple dataset is derived from those logs and kept as the
canonical CSV; models are stored as JSON documents with an atomically
swapped active pointer. Everything is crash-recoverable by replaying logs.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from ..dataset import Dataset, PracticeMode, PracticeTuple, dumps_csv, load_csv
from ..errors import PracticeGPError
from ..gp import GPModel, from_json, to_json
from ..score_perf import Score, parse_score, score_to_json

EVENT_KINDS = ("PRE_PERF", "PRACTICE", "POST_PERF", "RECOMMENDATION")


class StorageError(PracticeGPError):
    pass


class UnknownSessionError(StorageError):
    pass


@dataclass(frozen=True)
class Event:
    seq: int
    ts: float
    kind: str
    payload: dict


@dataclass(frozen=True)
class SessionMeta:
    session_id: str
    learner_id: str
    piece_id: str
    bpm: float


@dataclass(frozen=True)
class OpenUnit:
    """State of the practice unit currently in progress, derived from events."""

    p_pre: float | None = None
    t_pre: float | None = None
    pm: int | None = None
    bpm: float | None = None

    @property
    def has_pre(self) -> bool:
        return self.p_pre is not None

    @property
    def has_practice(self) -> bool:
        return self.pm is not None


def derive_open_unit(events: list[Event]) -> OpenUnit:
    unit = OpenUnit()
    for e in events:
        if e.kind == "PRE_PERF":
            unit = OpenUnit(p_pre=e.payload["pitch_error"], t_pre=e.payload["timing_error"])
        elif e.kind == "PRACTICE" and unit.has_pre:
            unit = OpenUnit(
                p_pre=unit.p_pre, t_pre=unit.t_pre, pm=e.payload["pm"], bpm=e.payload["bpm"]
            )
        elif e.kind == "POST_PERF":
            unit = OpenUnit()
    return unit


def closed_units(meta: SessionMeta, events: list[Event]) -> list[tuple[Event, PracticeTuple]]:
    """Replay one session's log into (closing event, practice tuple) pairs."""
    out = []
    unit = OpenUnit()
    for e in events:
        if e.kind == "PRE_PERF":
            unit = OpenUnit(p_pre=e.payload["pitch_error"], t_pre=e.payload["timing_error"])
        elif e.kind == "PRACTICE" and unit.has_pre:
            unit = OpenUnit(
                p_pre=unit.p_pre, t_pre=unit.t_pre, pm=e.payload["pm"], bpm=e.payload["bpm"]
            )
        elif e.kind == "POST_PERF":
            if unit.has_pre and unit.has_practice:
                out.append(
                    (
                        e,
                        PracticeTuple(
                            subject_id=meta.learner_id,
                            piece_id=meta.piece_id,
                            p_pre=unit.p_pre,
                            t_pre=unit.t_pre,
                            pm=PracticeMode(unit.pm),
                            bpm=unit.bpm,
                            p_post=e.payload["pitch_error"],
                            t_post=e.payload["timing_error"],
                        ),
                    )
                )
            unit = OpenUnit()
    return out


def derive_tuples(meta: SessionMeta, events: list[Event]) -> list[PracticeTuple]:
    """Replay one session's log into its closed practice tuples."""
    return [t for _, t in closed_units(meta, events)]


class Storage:
    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        for sub in ("sessions", "models", "jobs", "scores", "datasets"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._recorded_lock = threading.Lock()

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    # -- sessions ----------------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.jsonl"

    def create_session(self, learner_id: str, piece_id: str, bpm: float) -> SessionMeta:
        session_id = uuid.uuid4().hex
        meta = SessionMeta(session_id=session_id, learner_id=learner_id, piece_id=piece_id, bpm=bpm)
        header = {"meta": {"learner_id": learner_id, "piece_id": piece_id, "bpm": bpm}}
        path = self._session_path(session_id)
        with self._session_lock(session_id):
            with path.open("x", encoding="utf-8") as f:
                f.write(json.dumps(header, sort_keys=True) + "\n")
        return meta

    def session_meta(self, session_id: str) -> SessionMeta:
        path = self._session_path(session_id)
        if not path.exists():
            raise UnknownSessionError(f"no session {session_id}")
        with path.open(encoding="utf-8") as f:
            header = json.loads(f.readline())
        m = header["meta"]
        return SessionMeta(
            session_id=session_id, learner_id=m["learner_id"], piece_id=m["piece_id"], bpm=m["bpm"]
        )

    def list_sessions(self) -> list[SessionMeta]:
        out = []
        for path in sorted((self.root / "sessions").glob("*.jsonl")):
            out.append(self.session_meta(path.stem))
        return out

    def load_events(self, session_id: str) -> list[Event]:
        path = self._session_path(session_id)
        if not path.exists():
            raise UnknownSessionError(f"no session {session_id}")
        events = []
        with path.open(encoding="utf-8") as f:
            f.readline()  # meta header
            for line in f:
                if line.strip():
                    doc = json.loads(line)
                    events.append(
                        Event(seq=doc["seq"], ts=doc["ts"], kind=doc["kind"], payload=doc["payload"])
                    )
        return events

    def append_event(self, session_id: str, kind: str, payload: dict) -> Event:
        if kind not in EVENT_KINDS:
            raise StorageError(f"unknown event kind {kind}")
        path = self._session_path(session_id)
        if not path.exists():
            raise UnknownSessionError(f"no session {session_id}")
        with self._session_lock(session_id):
            events = self.load_events(session_id)
            event = Event(seq=len(events), ts=time.time(), kind=kind, payload=payload)
            with path.open("a", encoding="utf-8") as f:
                f.write(
                    json.dumps(
                        {"seq": event.seq, "ts": event.ts, "kind": kind, "payload": payload},
                        sort_keys=True,
                    )
                    + "\n"
                )
        return event

    # -- recorded dataset ----------------------------------------------------

    @property
    def recorded_path(self) -> Path:
        return self.root / "recorded.csv"

    def append_tuple(self, t: PracticeTuple) -> None:
        with self._recorded_lock:
            current = self.load_recorded()
            updated = Dataset(tuples=current.tuples + (t,), provenance=current.provenance)
            self.recorded_path.write_text(dumps_csv(updated), encoding="utf-8")

    def load_recorded(self) -> Dataset:
        if not self.recorded_path.exists():
            return Dataset(tuples=())
        return load_csv(self.recorded_path)

    def replay_recorded(self) -> Dataset:
        """Rebuild the recorded dataset from every session log.

        Tuples are ordered by the closing POST_PERF event's timestamp (ties
        broken by session id), which is the order they were appended in.
        """
        entries: list[tuple[float, str, PracticeTuple]] = []
        for meta in self.list_sessions():
            for event, t in closed_units(meta, self.load_events(meta.session_id)):
                entries.append((event.ts, meta.session_id, t))
        entries.sort(key=lambda e: (e[0], e[1]))
        return Dataset(tuples=tuple(t for _, _, t in entries))

    def resolve_dataset(self, ref: str) -> Dataset:
        """Map a training request's dataset reference to a Dataset.

        "recorded" means the service's own recorded tuples; anything else is
        a CSV file name under <data_dir>/datasets.
        """
        if ref == "recorded":
            return self.load_recorded()
        name = Path(ref).name  # no path traversal
        path = self.root / "datasets" / name
        if not path.exists():
            raise StorageError(f"no dataset {name!r} under {self.root / 'datasets'}")
        return load_csv(path)

    # -- scores --------------------------------------------------------------

    def save_score(self, score: Score) -> None:
        path = self.root / "scores" / f"{score.piece_id}.json"
        path.write_text(score_to_json(score), encoding="utf-8")

    def load_score(self, piece_id: str) -> Score:
        path = self.root / "scores" / f"{piece_id}.json"
        if not path.exists():
            raise StorageError(f"no score for piece {piece_id!r}")
        return parse_score(path.read_text(encoding="utf-8"))

    # -- models ----------------------------------------------------------------

    def save_model(self, model_id: str, model: GPModel, meta: dict) -> None:
        path = self.root / "models" / f"{model_id}.json"
        doc = {"meta": meta, "model": json.loads(to_json(model))}
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)

    def load_model(self, model_id: str) -> tuple[GPModel, dict]:
        path = self.root / "models" / f"{model_id}.json"
        if not path.exists():
            raise StorageError(f"no model {model_id}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        return from_json(json.dumps(doc["model"])), doc["meta"]

    def list_models(self) -> list[dict]:
        out = []
        for path in sorted((self.root / "models").glob("*.json")):
            if path.name == "active.json":
                continue
            doc = json.loads(path.read_text(encoding="utf-8"))
            out.append({"model_id": path.stem, **doc["meta"]})
        return out

    def write_active_pointer(self, model_id: str) -> None:
        path = self.root / "models" / "active.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"model_id": model_id}), encoding="utf-8")
        os.replace(tmp, path)

    def read_active_pointer(self) -> str | None:
        path = self.root / "models" / "active.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["model_id"]

    # -- jobs -------------------------------------------------------------------

    def write_job(self, job_id: str, doc: dict) -> None:
        path = self.root / "jobs" / f"{job_id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)

    def read_job(self, job_id: str) -> dict | None:
        path = self.root / "jobs" / f"{job_id}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))
