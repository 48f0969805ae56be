"""Exception hierarchy.

The CLI maps these onto exit codes: configuration/domain problems exit 2,
mathematical inapplicability exits 3, numerical degeneracy exits 4.
"""


class WasserstatError(Exception):
    """Base class for all library errors."""


class ConfigurationError(WasserstatError):
    """Invalid input data or configuration (disconnected graph, bad JSON, ...)."""


class DomainError(WasserstatError):
    """A parameter point lies outside the model's domain box (or too close to
    its boundary for a finite-difference stencil)."""


class InapplicableError(WasserstatError):
    """A mathematical precondition fails, e.g. a log-Sobolev check with a
    non-positive curvature bound."""


class NumericalDegeneracyError(WasserstatError):
    """Numerical rank loss or near-singularity beyond configured guards."""


class DegenerateMetricError(NumericalDegeneracyError):
    """Metric tensor numerically rank-deficient at the evaluation point."""


class BoundaryStallError(NumericalDegeneracyError):
    """Flow step could not be completed without leaving the domain, even at
    the minimum step size.  Carries the partial trajectory when raised from
    a trajectory integration."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class DegenerateRateError(NumericalDegeneracyError):
    """Convergence-rate estimation impossible: every initial condition is
    already at equilibrium."""
