"""Exception types raised across the package."""


class FitscapeError(ValueError):
    """Base class for all domain errors."""


class UnsupportedFunction(FitscapeError):
    pass


class InvalidDimension(FitscapeError):
    pass


class DimensionMismatch(FitscapeError):
    pass


class DimensionTooLarge(FitscapeError):
    pass


class NonFiniteInput(FitscapeError):
    pass


class SampleTooSmall(FitscapeError):
    pass


class InvalidBounds(FitscapeError):
    pass


class NumericalFailure(FitscapeError):
    pass


class OutOfBounds(FitscapeError):
    pass


class NeighborhoodTooLarge(FitscapeError):
    pass


class InvalidNorm(FitscapeError):
    pass


class OutOfProtocol(FitscapeError):
    pass


class EmptySplit(FitscapeError):
    pass


class DegenerateLabels(FitscapeError):
    pass


class IoError(OSError):
    """Artifact could not be read or written; ``key`` names the offending item."""

    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.key = key
