"""Exception types shared across the package."""


class HypmassError(Exception):
    """Base class for all package errors."""


class DomainError(HypmassError):
    """Input outside the declared chart or parameter domain."""


class DegenerateMetricError(HypmassError):
    """Metric matrix singular or non-positive at an evaluation point."""

    def __init__(self, point, message="degenerate metric"):
        self.point = point
        super().__init__(f"{message} at {point}")


class BoundaryMismatchError(HypmassError):
    """Boundary manifold curvature incompatible with the requested k."""


class UnknownBasisError(HypmassError):
    """No built-in static-potential basis for this boundary geometry."""


class DivergentMassError(HypmassError):
    """Mass integrals failed the convergence diagnostic."""

    def __init__(self, diagnostics=None, message="mass integrals divergent"):
        self.diagnostics = diagnostics
        super().__init__(message)


class ConfigError(HypmassError):
    """Invalid run configuration."""
