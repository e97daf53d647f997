"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument lies outside its documented domain."""


class CoverageError(RuntimeError):
    """A ball cover fails to cover its domain."""


class CalibrationError(RuntimeError):
    """Amplitude calibration found no feasible amplitude."""


class ResourceBudgetError(RuntimeError):
    """A construction budget would exceed its declared caps."""


class TrainingDivergenceError(RuntimeError):
    """Empirical loss exceeded the divergence threshold during training.

    The loss trace recorded up to the failing step is attached so callers
    can inspect what happened.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ConfigError(ValueError):
    """An experiment configuration is invalid."""


class FitError(ValueError):
    """A scaling fit cannot be performed on the given points."""
