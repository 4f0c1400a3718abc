"""Exception and warning types shared across the package."""


class PracticeGPError(Exception):
    """Base class for all errors raised by this package."""


class MidiParseError(PracticeGPError):
    """Malformed Standard MIDI File; carries the byte offset of the problem."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class EmptyPerformanceError(PracticeGPError):
    """A MIDI file contained no note-on events."""


class ScoreValidationError(PracticeGPError):
    """A score document violated the schema; names the offending field."""

    def __init__(self, message: str, field: str):
        super().__init__(f"{message} (field: {field})")
        self.field = field


class DatasetValidationError(PracticeGPError):
    """A dataset row failed validation; carries the 1-based row number."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class DegenerateDatasetError(PracticeGPError):
    """The dataset cannot support the requested operation (e.g. one class only)."""


class SingularDesignError(PracticeGPError):
    """Rank-deficient regression design; names the dependent columns."""

    def __init__(self, message: str, dependent_columns: list[str]):
        super().__init__(f"{message}: {', '.join(dependent_columns)}")
        self.dependent_columns = dependent_columns


class NumericalError(PracticeGPError):
    """A numerical routine failed beyond recovery (e.g. Cholesky after jitter escalation)."""


class UnstratifiedSplitWarning(UserWarning):
    """Dataset too small to stratify by practice mode; the split fell back to plain shuffling."""


class NoMatchedNotesWarning(UserWarning):
    """Timing error requested on an alignment with zero matched notes."""
