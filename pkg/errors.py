# errors.py
"""
Exception hierarchy for the WSI cluster-entropy pipeline.

Every error carries the name of the pipeline stage that raised it so the
CLI can print a `"<stage>: <message>"` diagnostic and pick an exit code.
"""

from typing import Optional


class PipelineError(Exception):
    """Base class for all pipeline failures."""

    stage: str = "pipeline"


# ---------------- DATASET ----------------


class IngestionError(PipelineError):
    """A feature table file is malformed."""

    stage = "dataset"

    def __init__(self, message: str, row: Optional[int] = None, field: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if field is not None:
            location.append(f"field {field!r}")
        if location:
            message = f"{', '.join(location)}: {message}"
        super().__init__(message)
        self.row = row
        self.field = field


class LabelingError(PipelineError):
    stage = "dataset"


class EmptyLabelError(PipelineError):
    stage = "dataset"


class GroupLookupError(PipelineError, KeyError):
    stage = "dataset"

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class InputNotFoundError(PipelineError):
    """A path given on the command line does not exist."""

    stage = "input"

    def __init__(self, path: str):
        super().__init__(f"input file not found: {path}")
        self.path = path


# ---------------- NUMERICS ----------------


class DimensionError(PipelineError):
    stage = "pca"


class InsufficientDataError(PipelineError):
    stage = "pca"


class InfeasibleKError(PipelineError):
    stage = "cluster"


class NumericError(PipelineError):
    stage = "cluster"


class ConsistencyError(PipelineError):
    stage = "entropy"


class EmptyGroupError(PipelineError):
    stage = "entropy"


class SliceError(PipelineError):
    stage = "rank"


# ---------------- SIMULATION / EVALUATION ----------------


class ConfigError(PipelineError):
    stage = "config"


class TrainingError(PipelineError):
    stage = "train"

    def __init__(self, message: str, epoch: Optional[int] = None):
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
        self.epoch = epoch


class EvaluationError(PipelineError):
    stage = "evaluate"


class LeakageError(PipelineError):
    """Train and test splits share a WSI."""

    stage = "evaluate"


class DegenerateError(PipelineError):
    stage = "stats"
