"""Exception types shared across the package."""


class HamlearnError(Exception):
    """Base class for all package errors."""


class ConfigError(HamlearnError):
    """Inconsistent dimensions, bad configuration values, or unusable input."""


class DomainError(HamlearnError):
    """A point left the domain of a potential, candidate function, or transform."""


class FormatError(HamlearnError):
    """Malformed serialized data (model files, trajectory files)."""


class DivergenceError(HamlearnError):
    """Training loss became non-finite."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"loss became non-finite at step {step}")


class AllPrunedError(HamlearnError):
    """Thresholding removed every candidate; the threshold is too large."""


class NoFitError(HamlearnError):
    """No threshold in the schedule produced a fit passing the residual criterion."""
