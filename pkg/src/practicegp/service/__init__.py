"""Practice-session HTTP service with file-backed persistence."""

from .app import ServiceConfig, create_app
from .jobs import JobManager, JobState, JobStatus, ModelRegistry
from .storage import Storage, derive_open_unit, derive_tuples

__all__ = [
    "JobManager",
    "JobState",
    "JobStatus",
    "ModelRegistry",
    "ServiceConfig",
    "Storage",
    "create_app",
    "derive_open_unit",
    "derive_tuples",
]
