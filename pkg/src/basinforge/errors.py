"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class BasinforgeError(Exception):
    """Base class for errors raised by the package."""


class DomainError(BasinforgeError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class NoSolutionError(DomainError):
    """An equation has no solution for the given target."""


class SeparatrixError(DomainError):
    """A phase point is too close to the separatrix for action-angle coordinates."""


class AboveThresholdError(DomainError):
    """A requested damping ratio exceeds the resonance threshold."""


class AbsentPairError(DomainError):
    """A report has no rotating attractor pair of opposite winding."""


class IntegrationError(BasinforgeError):
    """Failure in a time integrator.

    Attributes
    ----------
    tau, state :
        Last successfully reached time and state, when available.
    """

    def __init__(self, message: str, tau: float | None = None, state=None):
        super().__init__(message)
        self.tau = tau
        self.state = state


class StepSizeUnderflow(IntegrationError):
    """The adaptive step fell below the representable minimum."""


class NonFiniteState(IntegrationError):
    """The solution became NaN or infinite."""


class RadiusCollapse(IntegrationError):
    """The Taylor series radius estimate became vanishingly small."""


class LostTrackError(BasinforgeError):
    """A continued attractor converged somewhere else."""
