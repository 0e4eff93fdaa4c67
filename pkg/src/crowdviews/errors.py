"""Exception types shared across the package."""


class CrowdviewsError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CrowdviewsError, ValueError):
    """Invalid encoder or training configuration."""


class ShapeError(CrowdviewsError, ValueError):
    """Array dimensions do not match what an operation requires."""


class NumericError(CrowdviewsError, ValueError):
    """Non-finite or out-of-range numeric input."""


class UnknownIdError(CrowdviewsError, KeyError):
    """A triplet references an item or worker id that is not registered."""


class CheckpointError(CrowdviewsError):
    """Checkpoint file is missing, corrupt, or incompatible."""


class TrainingError(CrowdviewsError):
    """Training aborted; carries the epoch/batch/triplet that caused it."""

    def __init__(self, message, epoch=None, batch=None, triplet=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.triplet = triplet


class SimulationError(CrowdviewsError):
    """Simulated annotation could not produce the requested data."""
