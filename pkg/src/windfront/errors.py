"""Exception hierarchy shared by every windfront module."""


class WindfrontError(Exception):
    """Base class for all engine errors."""


class DomainViolation(WindfrontError):
    """A tangent vector lies outside the conic domain of the metric."""


class DegenerateMetric(WindfrontError):
    """A Riemannian field failed positive-definiteness."""


class NotMild(WindfrontError):
    """Navigation data with critical or strong wind where mild wind is required."""


class NotRanders(WindfrontError):
    """Randers coefficients with ||omega|| >= 1."""


class SignatureViolation(WindfrontError):
    """SSTK data with Lambda + ||omega||^2 <= 0 (not Lorentzian)."""


class SmoothnessViolation(WindfrontError):
    """Fundamental tensor requested too close to the d/dt ray."""


class DomainExit(WindfrontError):
    """A trajectory left the spatial box or the conic domain."""


class StepRejected(WindfrontError):
    """An integration step produced NaN or Inf."""


class NoSolution(WindfrontError):
    """No lightlike G-orthogonal direction exists at a front point."""


class AmbiguousSide(WindfrontError):
    """Both orthogonal directions have the same normal component."""


class OutOfHorizon(WindfrontError):
    """Query time outside the integrated time span."""


class Unreachable(WindfrontError):
    """Target not reachable by admissible curves."""


class ShootingStalled(WindfrontError):
    """Heading search could not bracket the target.

    ``best`` carries the best candidate found, if any.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ParseError(WindfrontError):
    def __init__(self, message, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ValidationError(WindfrontError):
    """Scenario validation failure; ``issues`` lists every (field path, message)."""

    def __init__(self, issues):
        self.issues = list(issues)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.issues)
        super().__init__(f"{len(self.issues)} validation error(s): {lines}")


class ResolutionWarning(UserWarning):
    """Seed spacing grew too large to resolve cut points reliably."""
