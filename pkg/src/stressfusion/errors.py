"""Exception hierarchy shared by every stage of the pipeline."""


class StressFusionError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(StressFusionError, ValueError):
    """Invalid configuration or argument values."""


class CohortEmptyError(StressFusionError, ValueError):
    """A labeling operation received no scores."""


class SchemaError(StressFusionError, ValueError):
    """A CSV file is missing a required column."""

    def __init__(self, column, path=None):
        self.column = column
        self.path = path
        where = f" in {path}" if path is not None else ""
        super().__init__(f"missing required column {column!r}{where}")


class FormatError(StressFusionError, ValueError):
    """Malformed input data (ragged rows, non-monotonic timestamps, ...)."""


class EmptyRecordingError(StressFusionError, ValueError):
    """A recording has no usable samples left."""


class DataQualityError(StressFusionError, ValueError):
    """A feature is undefined for the given data (zero variance, zero denominator)."""


class AlignmentError(StressFusionError, ValueError):
    """Datasets that must describe the same subjects do not line up."""


class TrainingError(StressFusionError, ValueError):
    """A classifier cannot be fitted to the supplied data."""


class SubjectError(StressFusionError):
    """Wraps a component failure with the subject it happened on."""

    def __init__(self, subject_id, cause):
        self.subject_id = subject_id
        self.cause = cause
        super().__init__(f"subject {subject_id}: {cause}")
