"""Exception and warning types shared across the package."""


class GenouError(Exception):
    """Base class for all package errors."""


class DomainError(GenouError):
    """A Laplace-exponent evaluation needs a jump moment that is not finite."""


class NoPositiveRoot(GenouError):
    """The exponent's Laplace transform has no positive root in the search domain."""


class NotStationaryHeavyTail(GenouError):
    """The exponent drifts the wrong way: no stationary heavy-tailed regime."""


class InvalidConfig(GenouError):
    """A simulation or experiment parameter is out of range."""


class PreconditionViolated(GenouError):
    """An identity check was invoked on a model that violates its hypothesis."""


class InsufficientData(GenouError):
    """Too few (or degenerate) observations for the requested estimator."""


class NonPositiveData(GenouError):
    """Estimator requires strictly positive observations."""


class TooFewExceedances(GenouError):
    """Not enough tail exceedances for a stable tail-ratio estimate."""


class NoExceedances(GenouError):
    """No observation exceeds the requested threshold."""


class EstimationUnstable(GenouError):
    """A tail-fit diagnostic (e.g. Hill plateau) failed to stabilise."""


class BoundaryAlpha(GenouError):
    """Tail index too close to a boundary case excluded from the limit theory."""


class MissingArtifact(GenouError):
    """A plot or report stage was asked for an artifact that was never produced."""


class ParseError(GenouError):
    """The experiment config document is not well formed."""


class ValidationError(GenouError):
    """The experiment config parsed but one or more fields are invalid.

    ``problems`` lists every violation found, not just the first.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class TruncationWarning(UserWarning):
    """A truncated-horizon Monte Carlo estimate failed its stability audit."""


class EstimationWarning(UserWarning):
    """An empirical tail fit looks unstable; treat the value with caution."""
