"""Exception types shared across the package."""


class SpectramaxError(Exception):
    """Base class for all package-specific errors."""


class ParseError(SpectramaxError):
    """Malformed mesh file."""


class TopologyError(SpectramaxError):
    """Mesh is not a closed, consistently oriented, connected surface."""


class DegenerateFace(SpectramaxError):
    """A triangle has zero (or negative) area."""


class LimitExceeded(SpectramaxError):
    """A generator parameter exceeds its configured maximum."""


class DegenerateLattice(SpectramaxError):
    """Lattice vectors are linearly dependent."""


class DimensionMismatch(SpectramaxError):
    """A vertex field does not match the mesh it is paired with."""


class ZeroNorm(SpectramaxError):
    """Rayleigh quotient requested for a vector with vanishing M-norm."""


class NoConvergence(SpectramaxError):
    """An iterative solver exhausted its budget.

    Carries whatever diagnostic the solver had at the point of failure in
    ``self.diagnostics`` (a dict), so callers can report best residuals.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class AmbiguousCluster(SpectramaxError):
    """No clear spectral gap above the first-eigenvalue cluster."""


class PositivityBreach(SpectramaxError):
    """Heat-smoothed density fell below the positivity floor."""


class CertificateSolveFailure(NoConvergence):
    """The inner convex certificate problem stagnated."""


class StallDetected(SpectramaxError):
    """No ascent direction and no improvement: terminal optimizer state."""


class NotCertified(SpectramaxError):
    """Operation requires a state holding a valid optimality certificate."""


class OutOfDomain(SpectramaxError):
    """Coordinate outside the collar cylinder."""


class DomainViolation(SpectramaxError):
    """Test-function ramps do not fit inside the cylinder."""


class DegenerateMass(SpectramaxError):
    """Balancing weights are too concentrated for Hersch balancing."""


class ConfigError(SpectramaxError):
    """Invalid run configuration."""
