"""Exception types raised across the package."""


class TripError(Exception):
    """Base class for all package-specific errors."""


class CoreShapeError(TripError, ValueError):
    """Core tensors do not form a valid ring (bad rank, sizes, or adjacency)."""


class DegenerateDistributionError(TripError):
    """All effective core entries are zero; the distribution is undefined."""


class ConditionOnNullError(TripError):
    """Conditioning event has probability zero."""


class OracleSizeError(TripError):
    """Brute-force reference computation refused: problem exceeds the size cap."""


class DivergenceError(TripError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite training loss at epoch {epoch}")


class ModelFormatError(TripError, ValueError):
    """Model file is malformed or inconsistent with its declared shapes."""
