"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class EvaluationError(ArithmeticError):
    """A user-supplied function returned a non-finite or invalid value."""


class InconsistencyError(ArithmeticError):
    """A function assumed increasing was observed to decrease."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class ConditionViolated(ValueError):
    """Drift fails the increasing-ratio condition rho(t)/sqrt(t) needed for a d-inverse."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class NotDIncreasingError(ValueError):
    """The process is not d-increasing, so no d-inverse exists."""


class DegenerateTimeChangeError(ValueError):
    """The variance clock a(t) is not strictly increasing."""


class ClassificationError(RuntimeError):
    """Scaling-limit classification could not decide a case."""

    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile
