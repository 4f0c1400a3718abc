"""HTTP API for the live practice loop.

Sessions follow PRE performance -> recommendation -> practice -> POST
performance; closing a unit appends one practice tuple to the recorded
dataset. Training runs as background jobs; the trained model serves
recommendations and policy maps. Errors use a fixed envelope
{code, message, detail}.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .. import __version__
from ..dataset import PracticeMode
from ..errors import PracticeGPError
from ..gp import BACKEND, Family
from ..policy import policy_map, recommend
from ..score_perf import evaluate_performance, parse_smf
from .jobs import JobManager, ModelRegistry
from .storage import Storage, UnknownSessionError, derive_open_unit, derive_tuples


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: str
    default_family: Family = Family.RATQUAD
    default_bpm_candidates: tuple[float, ...] = (50.0, 80.0, 100.0)
    frontend_dir: str | None = None
    train_n_jobs: int | None = None


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: str = ""):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail


class CreateSessionBody(BaseModel):
    learner_id: str
    piece_id: str
    bpm: float


class PerformanceBody(BaseModel):
    phase: str  # PRE | POST
    pitch_error: float | None = None
    timing_error: float | None = None
    midi_base64: str | None = None


class PracticeBody(BaseModel):
    pm: int
    bpm: float


class TrainBody(BaseModel):
    dataset: str = "recorded"
    family: str = "ratquad"
    budget: int = 50
    seed: int = 0


def create_app(config: ServiceConfig) -> FastAPI:
    storage = Storage(config.data_dir)
    registry = ModelRegistry(storage)
    jobs = JobManager(storage, registry)

    app = FastAPI(title="practicegp", version=__version__)
    app.state.storage = storage
    app.state.registry = registry
    app.state.jobs = jobs

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.exception_handler(PracticeGPError)
    async def domain_error_handler(request: Request, exc: PracticeGPError):
        return JSONResponse(
            status_code=422,
            content={"code": "validation", "message": str(exc), "detail": type(exc).__name__},
        )

    def get_session(session_id: str):
        try:
            meta = storage.session_meta(session_id)
        except UnknownSessionError as exc:
            raise ApiError(404, "not_found", str(exc)) from exc
        return meta

    def active_model():
        active = registry.active()
        if active is None:
            raise ApiError(409, "model_not_trained", "no trained model is active yet")
        return active

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__, "gp_backend": BACKEND}

    # -- sessions -----------------------------------------------------------

    @app.post("/api/sessions")
    def create_session(body: CreateSessionBody):
        if body.bpm <= 0:
            raise ApiError(422, "validation", "bpm must be positive")
        meta = storage.create_session(body.learner_id, body.piece_id, body.bpm)
        return {"session_id": meta.session_id}

    @app.get("/api/sessions")
    def list_sessions():
        return {
            "sessions": [
                {
                    "session_id": m.session_id,
                    "learner_id": m.learner_id,
                    "piece_id": m.piece_id,
                    "bpm": m.bpm,
                }
                for m in storage.list_sessions()
            ]
        }

    @app.get("/api/sessions/{session_id}")
    def get_session_view(session_id: str):
        meta = get_session(session_id)
        events = storage.load_events(session_id)
        unit = derive_open_unit(events)
        if not unit.has_pre:
            phase = "AWAITING_PRE"
        elif not unit.has_practice:
            phase = "AWAITING_PRACTICE"
        else:
            phase = "AWAITING_POST"
        return {
            "session_id": meta.session_id,
            "learner_id": meta.learner_id,
            "piece_id": meta.piece_id,
            "bpm": meta.bpm,
            "phase": phase,
            "open_unit": {
                "p_pre": unit.p_pre,
                "t_pre": unit.t_pre,
                "pm": unit.pm,
                "bpm": unit.bpm,
            },
            "events": [
                {"seq": e.seq, "ts": e.ts, "kind": e.kind, "payload": e.payload} for e in events
            ],
        }

    def errors_from_payload(meta, body: PerformanceBody) -> tuple[float, float]:
        if body.midi_base64 is not None:
            try:
                raw = base64.b64decode(body.midi_base64, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise ApiError(422, "validation", f"invalid base64 MIDI payload: {exc}") from exc
            score = storage.load_score(meta.piece_id)
            perf = parse_smf(raw)
            result = evaluate_performance(score, perf)
            return result.pitch, result.timing
        if body.pitch_error is None or body.timing_error is None:
            raise ApiError(
                422,
                "validation",
                "either midi_base64 or both pitch_error and timing_error are required",
            )
        if not (0.0 <= body.pitch_error <= 1.0 and 0.0 <= body.timing_error <= 1.0):
            raise ApiError(422, "validation", "errors must lie in [0, 1]")
        return body.pitch_error, body.timing_error

    @app.post("/api/sessions/{session_id}/performances")
    def submit_performance(session_id: str, body: PerformanceBody):
        meta = get_session(session_id)
        phase = body.phase.upper()
        if phase not in ("PRE", "POST"):
            raise ApiError(422, "validation", f"phase must be PRE or POST, got {body.phase!r}")
        unit = derive_open_unit(storage.load_events(session_id))
        if phase == "PRE" and unit.has_pre:
            raise ApiError(409, "conflict", "a practice unit is already open; submit POST first")
        if phase == "POST" and not (unit.has_pre and unit.has_practice):
            raise ApiError(
                409, "conflict", "no open practice unit: submit PRE and log a practice first"
            )
        pitch, timing = errors_from_payload(meta, body)
        kind = "PRE_PERF" if phase == "PRE" else "POST_PERF"
        storage.append_event(
            session_id, kind, {"pitch_error": pitch, "timing_error": timing}
        )
        tuple_recorded = False
        if phase == "POST":
            closed = derive_tuples(meta, storage.load_events(session_id))
            storage.append_tuple(closed[-1])
            tuple_recorded = True
        return {"pitch_error": pitch, "timing_error": timing, "tuple_recorded": tuple_recorded}

    @app.post("/api/sessions/{session_id}/practice")
    def log_practice(session_id: str, body: PracticeBody):
        get_session(session_id)
        if body.pm not in (0, 1):
            raise ApiError(422, "validation", "pm must be 0 (pitch) or 1 (timing)")
        if body.bpm <= 0:
            raise ApiError(422, "validation", "bpm must be positive")
        unit = derive_open_unit(storage.load_events(session_id))
        if not unit.has_pre:
            raise ApiError(409, "conflict", "no PRE performance submitted yet")
        storage.append_event(session_id, "PRACTICE", {"pm": body.pm, "bpm": body.bpm})
        return {"ok": True}

    @app.get("/api/sessions/{session_id}/recommendation")
    def get_recommendation(session_id: str, bpms: str = ""):
        meta = get_session(session_id)
        unit = derive_open_unit(storage.load_events(session_id))
        if not unit.has_pre:
            raise ApiError(409, "conflict", "no PRE performance submitted yet")
        model_id, model, _ = active_model()
        if bpms:
            try:
                candidates = [float(b) for b in bpms.split(",") if b.strip()]
            except ValueError as exc:
                raise ApiError(422, "validation", f"bad bpms list {bpms!r}") from exc
        else:
            candidates = list(config.default_bpm_candidates)
        ranked = []
        for bpm in candidates:
            rec = recommend(model, unit.p_pre, unit.t_pre, bpm)
            for pm, mean, sd in (
                (PracticeMode.PITCH, rec.mean_pitch, rec.sd_pitch),
                (PracticeMode.TIMING, rec.mean_timing, rec.sd_timing),
            ):
                ranked.append(
                    {"pm": int(pm), "bpm": bpm, "mean": mean, "sd": sd, "tie": rec.tie}
                )
        # stable order: utility desc, then pitch before timing, then bpm
        ranked.sort(key=lambda r: (-r["mean"], r["pm"], r["bpm"]))
        best = ranked[0]
        storage.append_event(
            session_id,
            "RECOMMENDATION",
            {"pm": best["pm"], "bpm": best["bpm"], "mean": best["mean"], "sd": best["sd"],
             "model_id": model_id},
        )
        return {
            "pm": best["pm"],
            "bpm": best["bpm"],
            "mean": best["mean"],
            "sd": best["sd"],
            "tie": best["tie"],
            "model_id": model_id,
            "alternatives": ranked,
        }

    # -- training and models --------------------------------------------------

    @app.post("/api/train")
    def start_training(body: TrainBody):
        try:
            family = Family(body.family.lower())
        except ValueError as exc:
            raise ApiError(
                422, "validation", f"unknown kernel family {body.family!r}",
                detail="expected rbf, ratquad, or matern52",
            ) from exc
        if body.budget < 1:
            raise ApiError(422, "validation", "budget must be at least 1")
        job_id = jobs.start_training(
            body.dataset, family, body.budget, body.seed, n_jobs=config.train_n_jobs
        )
        return {"job_id": job_id}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        status = jobs.get(job_id)
        if status is None:
            raise ApiError(404, "not_found", f"no job {job_id}")
        return status.to_dict()

    @app.get("/api/models")
    def list_models():
        active = registry.active()
        return {
            "active": active[0] if active else None,
            "models": storage.list_models(),
        }

    @app.get("/api/policy-map")
    def get_policy_map(bpm: float = 80.0, resolution: int = 41):
        if resolution < 2 or resolution > 501:
            raise ApiError(422, "validation", "resolution must be in [2, 501]")
        _, model, _ = active_model()
        grid = policy_map(model, bpm=bpm, resolution=resolution)
        return PlainTextResponse(grid.to_csv(), media_type="text/csv")

    @app.get("/api/dataset")
    def get_dataset():
        recorded = storage.load_recorded()
        return {"n_tuples": len(recorded)}

    if config.frontend_dir and Path(config.frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.frontend_dir, html=True), name="console")

    return app
