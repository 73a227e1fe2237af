"""Exception hierarchy shared by every module of the package."""


class NHSenseError(Exception):
    """Base class for all package errors."""


class InstabilityError(NHSenseError):
    """Raised when a chain lies outside the dynamically stable region.

    In the regime gamma1 < t1 and gamma2 < t2 the chain is similar to a purely
    parametrically driven model with no hopping, which always has growing modes.
    """


class SingularMatrixError(NHSenseError):
    """The dynamical matrix cannot be inverted (marginal or fine-tuned point)."""


class NotTabulated(NHSenseError):
    """A closed-form matrix element was requested that has no known expression."""


class PoleEncountered(NHSenseError):
    """A closed-form expression was evaluated on (or numerically at) its pole."""

    def __init__(self, message: str, distance: float = 0.0):
        super().__init__(message)
        self.distance = distance


class NoEnhancement(NHSenseError):
    """No optimal drive position exists (a log-ratio is not positive)."""


class NoBreakdown(NHSenseError):
    """The linear-response regime never breaks down (no amplification)."""


class ConvergenceError(NHSenseError):
    """Time-domain integration did not reach a steady state."""

    def __init__(self, message: str, residual: float, diverged: bool = False):
        super().__init__(message)
        self.residual = residual
        self.diverged = diverged


class ConfigError(NHSenseError):
    """Invalid run configuration."""
