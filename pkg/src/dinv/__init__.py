"""d-inverses of Brownian motion with drift: laws, scaling limits and GBM pricing."""

from .dinverse import DInverse, TransformedLaw, check_d_increasing, transform
from .drift import DriftFunction, DriftKind, eta, verify_condition_A
from .errors import (
    ClassificationError,
    ConditionViolated,
    DegenerateTimeChangeError,
    DomainError,
    EvaluationError,
    InconsistencyError,
    NotDIncreasingError,
)
from .numerics import MonotoneFn, left_inverse, normal_cdf, normal_quantile

__all__ = [
    "ClassificationError",
    "ConditionViolated",
    "DInverse",
    "DegenerateTimeChangeError",
    "DomainError",
    "DriftFunction",
    "DriftKind",
    "EvaluationError",
    "InconsistencyError",
    "MonotoneFn",
    "NotDIncreasingError",
    "TransformedLaw",
    "check_d_increasing",
    "eta",
    "left_inverse",
    "normal_cdf",
    "normal_quantile",
    "transform",
    "verify_condition_A",
]
__version__ = "0.1.0"
