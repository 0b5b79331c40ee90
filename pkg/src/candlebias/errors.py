"""Exception types shared across the package."""


class DataError(Exception):
    """Raised when input data cannot be ingested, labeled or split as requested."""


class TrainingDivergedError(Exception):
    """Raised when a training loop produces a non-finite cost or parameter."""
