"""Background training jobs.

Each job runs the scaffold optimization in its own worker thread, reports
progress as completed BO iterations / budget, and on success registers its
model and makes it active. When jobs overlap, whichever finishes last owns
the active pointer; every result stays on disk either way.
"""

from __future__ import annotations

import enum
import threading
import time
import traceback
import uuid
from dataclasses import dataclass, replace

from ..dataset import Dataset
from ..gp import Family
from ..policy import optimize_scaffold
from .storage import Storage


class JobState(str, enum.Enum):
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    DONE = "DONE"
    FAILED = "FAILED"


_ALLOWED_TRANSITIONS = {
    JobState.QUEUED: {JobState.RUNNING, JobState.FAILED},
    JobState.RUNNING: {JobState.DONE, JobState.FAILED},
    JobState.DONE: set(),
    JobState.FAILED: set(),
}


@dataclass(frozen=True)
class JobStatus:
    job_id: str
    state: JobState
    progress: float
    message: str = ""
    result_ref: str | None = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "state": self.state.value,
            "progress": self.progress,
            "message": self.message,
            "result_ref": self.result_ref,
        }


class ModelRegistry:
    """Holds the active model in memory; activation is one reference swap."""

    def __init__(self, storage: Storage):
        self._storage = storage
        self._active = None  # (model_id, GPModel, meta) | None
        model_id = storage.read_active_pointer()
        if model_id is not None:
            model, meta = storage.load_model(model_id)
            self._active = (model_id, model, meta)

    def active(self):
        return self._active  # atomic read

    def register_and_activate(self, model, meta: dict) -> str:
        model_id = uuid.uuid4().hex
        self._storage.save_model(model_id, model, meta)
        self._storage.write_active_pointer(model_id)
        self._active = (model_id, model, meta)  # atomic swap, readers see old or new
        return model_id


class JobManager:
    def __init__(self, storage: Storage, registry: ModelRegistry):
        self._storage = storage
        self._registry = registry
        self._jobs: dict[str, JobStatus] = {}
        self._lock = threading.Lock()

    def _set(self, job_id: str, **changes) -> None:
        with self._lock:
            status = replace(self._jobs[job_id], **changes)
            if changes.get("state") is not None:
                old = self._jobs[job_id].state
                if status.state != old and status.state not in _ALLOWED_TRANSITIONS[old]:
                    raise RuntimeError(f"illegal job transition {old} -> {status.state}")
            self._jobs[job_id] = status
        self._storage.write_job(job_id, status.to_dict())

    def get(self, job_id: str) -> JobStatus | None:
        with self._lock:
            status = self._jobs.get(job_id)
        if status is None:
            doc = self._storage.read_job(job_id)
            if doc is None:
                return None
            status = JobStatus(
                job_id=doc["job_id"],
                state=JobState(doc["state"]),
                progress=doc["progress"],
                message=doc.get("message", ""),
                result_ref=doc.get("result_ref"),
            )
        return status

    def start_training(
        self,
        dataset_ref: str,
        family: Family,
        budget: int,
        seed: int,
        n_jobs: int | None = None,
    ) -> str:
        job_id = uuid.uuid4().hex
        with self._lock:
            self._jobs[job_id] = JobStatus(job_id=job_id, state=JobState.QUEUED, progress=0.0)
        self._storage.write_job(job_id, self._jobs[job_id].to_dict())

        def work():
            try:
                dataset = self._storage.resolve_dataset(dataset_ref)
                if len(dataset) == 0:
                    raise ValueError(f"dataset {dataset_ref!r} is empty")
                self._set(job_id, state=JobState.RUNNING)
                params, model, trace = optimize_scaffold(
                    dataset,
                    family,
                    budget=budget,
                    seed=seed,
                    progress=lambda done, total: self._set(job_id, progress=done / total),
                    n_jobs=n_jobs,
                )
                meta = {
                    "family": family.value,
                    "a": params.a,
                    "u_mu": params.u_mu,
                    "budget": budget,
                    "seed": seed,
                    "dataset": dataset_ref,
                    "n_tuples": len(dataset),
                    "cv_accuracy": trace.iterations[trace.best_index()].objective,
                    "created": time.time(),
                    "trace_csv": trace.to_csv(),
                }
                model_id = self._registry.register_and_activate(model, meta)
                self._set(job_id, state=JobState.DONE, progress=1.0, result_ref=model_id)
            except Exception as exc:  # noqa: BLE001 - job boundary
                self._set(
                    job_id,
                    state=JobState.FAILED,
                    message=f"{type(exc).__name__}: {exc}",
                )
                traceback.print_exc()

        threading.Thread(target=work, name=f"train-{job_id[:8]}", daemon=True).start()
        return job_id
