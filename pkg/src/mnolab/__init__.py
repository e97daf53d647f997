"""Desk-scale laboratory for multi-task operator learning.

The package provides:

* piecewise-linear (ReLU) network primitives with exact parameter accounting,
* bounded Lipschitz function classes with ball covers, tent partitions of
  unity, sensor projections and liftings,
* an infinite-dimensional "sine cube" of test functions with biorthogonal
  coefficient recovery and amplitude calibration,
* benchmark multiple-operator targets (kernel, rank-one, affine),
* the separable multi-operator architecture and a concatenated baseline,
  together with a constructive builder driven by partition-of-unity
  aggregation,
* hierarchical training-set generation, projected-gradient empirical risk
  minimisation and generalization estimation,
* closed-form calculators for generalization, metric-entropy, rate and
  minimax envelopes, and
* a sweep/fit/report command line front end.
"""

__version__ = "0.1.0"

from .errors import (
    CalibrationError,
    ConfigError,
    CoverageError,
    FitError,
    ParameterError,
    ResourceBudgetError,
    TrainingDivergenceError,
)

__all__ = [
    "CalibrationError",
    "ConfigError",
    "CoverageError",
    "FitError",
    "ParameterError",
    "ResourceBudgetError",
    "TrainingDivergenceError",
    "__version__",
]
