"""
Domain errors for the localization and proxemics pipeline.

All of them are ValueErrors so library callers can catch them broadly;
management commands turn them into CommandError and API views into 400s.
"""


class PoseProxemicsError(ValueError):
    """Base class for pipeline errors."""


class SchemaError(PoseProxemicsError):
    """A JSON / JSON-lines payload does not match its documented schema."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CameraError(PoseProxemicsError):
    """Invalid intrinsics or a point that cannot be imaged."""


class InsufficientKeypointsError(PoseProxemicsError):
    """Fewer visible joints than a pose needs to be usable."""


class WeightFormatError(PoseProxemicsError):
    """A weight file cannot be loaded."""


class WeightVersionError(WeightFormatError):
    """A weight file was written by an incompatible format version."""

    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(
            f"Weight file format version {found} is not supported "
            f"(expected version {expected})."
        )


class CorruptWeightsError(WeightFormatError):
    """A weight file is truncated or its arrays do not decode."""


class TrainingDivergedError(PoseProxemicsError):
    """The training objective became non-finite."""

    def __init__(self, epoch, batch, last_loss):
        self.epoch = epoch
        self.batch = batch
        self.last_loss = last_loss
        super().__init__(
            f"Training diverged at epoch {epoch}, batch {batch} "
            f"(last finite loss: {last_loss})."
        )


class CalibrationError(PoseProxemicsError):
    """Segment calibration could not be computed."""
