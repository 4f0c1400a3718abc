"""Practice-tuple datasets: validation, CSV persistence, and splitting.

One tuple records a single practice unit: the learner's errors before,
the practice mode and tempo chosen, and the errors after.
"""

from __future__ import annotations

import csv
import enum
import io
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DatasetValidationError, UnstratifiedSplitWarning


class PracticeMode(enum.IntEnum):
    PITCH = 0
    TIMING = 1


class Provenance(enum.Enum):
    RECORDED = "recorded"
    SYNTHETIC = "synthetic"


CSV_COLUMNS = ["subject_id", "piece_id", "p_pre", "t_pre", "pm", "bpm", "p_post", "t_post"]

MAX_BPM = 400.0


@dataclass(frozen=True)
class PracticeTuple:
    subject_id: str
    piece_id: str
    p_pre: float
    t_pre: float
    pm: PracticeMode
    bpm: float
    p_post: float
    t_post: float

    def __post_init__(self):
        for name in ("p_pre", "t_pre", "p_post", "t_post"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DatasetValidationError(f"{name}={value} outside [0, 1]")
        if not 0.0 < self.bpm <= MAX_BPM:
            raise DatasetValidationError(f"bpm={self.bpm} outside (0, {MAX_BPM}]")
        if self.pm not in (PracticeMode.PITCH, PracticeMode.TIMING):
            raise DatasetValidationError(f"pm={self.pm} must be 0 (pitch) or 1 (timing)")


@dataclass(frozen=True)
class Dataset:
    tuples: tuple[PracticeTuple, ...]
    provenance: Provenance = Provenance.RECORDED

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def pm_counts(self) -> dict[PracticeMode, int]:
        counts = {PracticeMode.PITCH: 0, PracticeMode.TIMING: 0}
        for t in self.tuples:
            counts[t.pm] += 1
        return counts

    def has_both_modes(self) -> bool:
        counts = self.pm_counts()
        return counts[PracticeMode.PITCH] > 0 and counts[PracticeMode.TIMING] > 0


def _parse_row(row: dict[str, str], row_number: int) -> PracticeTuple:
    def number(column: str) -> float:
        try:
            return float(row[column])
        except ValueError as exc:
            raise DatasetValidationError(f"cannot parse {column}={row[column]!r}", row_number) from exc

    pm_raw = row["pm"].strip()
    if pm_raw not in ("0", "1"):
        raise DatasetValidationError(f"pm must be 0 or 1, got {pm_raw!r}", row_number)
    try:
        return PracticeTuple(
            subject_id=row["subject_id"],
            piece_id=row["piece_id"],
            p_pre=number("p_pre"),
            t_pre=number("t_pre"),
            pm=PracticeMode(int(pm_raw)),
            bpm=number("bpm"),
            p_post=number("p_post"),
            t_post=number("t_post"),
        )
    except DatasetValidationError as exc:
        if exc.row is None:
            raise DatasetValidationError(str(exc), row_number) from exc
        raise


def loads_csv(text: str, provenance: Provenance = Provenance.RECORDED) -> Dataset:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise DatasetValidationError(
            f"header must be exactly {','.join(CSV_COLUMNS)}, got {reader.fieldnames}"
        )
    tuples = []
    for i, row in enumerate(reader, start=2):  # row 1 is the header
        if None in row or any(v is None for v in row.values()):
            raise DatasetValidationError("wrong number of cells", i)
        tuples.append(_parse_row(row, i))
    return Dataset(tuples=tuple(tuples), provenance=provenance)


def dumps_csv(dataset: Dataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for t in dataset.tuples:
        writer.writerow(
            [
                t.subject_id,
                t.piece_id,
                repr(t.p_pre),
                repr(t.t_pre),
                int(t.pm),
                repr(t.bpm),
                repr(t.p_post),
                repr(t.t_post),
            ]
        )
    return out.getvalue()


def load_csv(path: str | Path, provenance: Provenance = Provenance.RECORDED) -> Dataset:
    return loads_csv(Path(path).read_text(encoding="utf-8"), provenance)


def save_csv(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(dumps_csv(dataset), encoding="utf-8")


EXTERNAL_DATA_ENV = "PRACTICEGP_EXTERNAL_DATA"


def load_external_dataset(path: str | Path | None = None) -> Dataset | None:
    """Adapter for recorded expert-learner data obtained out of band.

    Checks `path`, then $PRACTICEGP_EXTERNAL_DATA. Returns None when no file
    is present. Currently expects the canonical CSV layout; translations for
    other layouts belong here once their format is known.
    """
    import os

    candidate = path or os.environ.get(EXTERNAL_DATA_ENV)
    if not candidate or not Path(candidate).exists():
        return None
    return load_csv(candidate, provenance=Provenance.RECORDED)


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic stratified train/test split.

    Test size is round(test_fraction * N). Stratification keeps both practice
    modes represented in both halves when the class counts allow it; when
    they do not, the split falls back to a plain shuffle and emits
    UnstratifiedSplitWarning.
    """
    n = len(dataset)
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    if n < 5:
        raise ValueError("dataset too small to split (need at least 5 tuples)")

    rng = np.random.default_rng(seed)
    n_test = min(max(int(round(test_fraction * n)), 1), n - 1)

    by_mode: dict[PracticeMode, list[int]] = {m: [] for m in PracticeMode}
    for i, t in enumerate(dataset.tuples):
        by_mode[t.pm].append(i)
    class_sizes = {m: len(ix) for m, ix in by_mode.items()}
    stratifiable = all(size >= 2 for size in class_sizes.values()) and n_test >= 2

    test_indices: list[int] = []
    if stratifiable:
        # proportional allocation, then adjust to hit n_test while keeping
        # at least one tuple of each mode on both sides
        alloc = {m: int(round(test_fraction * size)) for m, size in class_sizes.items()}
        for m, size in class_sizes.items():
            alloc[m] = min(max(alloc[m], 1), size - 1)
        while sum(alloc.values()) > n_test:
            m = max(alloc, key=lambda k: (alloc[k], int(k)))
            if alloc[m] <= 1:
                break
            alloc[m] -= 1
        while sum(alloc.values()) < n_test:
            m = max(class_sizes, key=lambda k: (class_sizes[k] - alloc[k], int(k)))
            if alloc[m] >= class_sizes[m] - 1:
                break
            alloc[m] += 1
        for m in sorted(by_mode, key=int):
            order = rng.permutation(len(by_mode[m]))
            test_indices.extend(by_mode[m][j] for j in order[: alloc[m]])
    else:
        warnings.warn(
            "dataset cannot be stratified by practice mode; splitting unstratified",
            UnstratifiedSplitWarning,
            stacklevel=2,
        )
        order = rng.permutation(n)
        test_indices = list(order[:n_test])

    test_set = set(test_indices)
    train = tuple(t for i, t in enumerate(dataset.tuples) if i not in test_set)
    test = tuple(t for i, t in enumerate(dataset.tuples) if i in test_set)
    return (
        replace(dataset, tuples=train),
        replace(dataset, tuples=test),
    )
