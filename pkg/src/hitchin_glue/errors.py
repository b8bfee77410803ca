"""Error types shared across the library."""


class HitchinGlueError(Exception):
    """Base class for library errors."""


class MatchingViolation(HitchinGlueError):
    """Model parameters on the two sides of the neck do not glue."""


class NearSingularDenominator(HitchinGlueError):
    """The diagonalizing gauge denominator 2C + phi0 came too close to 0."""


class QuadratureDivergence(HitchinGlueError):
    """A radial integrand does not decay toward r = 0."""


class CutoffSupportError(HitchinGlueError):
    """The cutoff annulus does not fit inside the neck."""


class SingularOperator(HitchinGlueError):
    """An operator expected to be invertible is numerically singular."""


class NonConvergence(HitchinGlueError):
    """An iterative solver failed to reach its tolerance."""


class ContractionFailure(HitchinGlueError):
    """The fixed-point iteration did not contract."""


class InsufficientSweep(HitchinGlueError):
    """A parameter sweep does not span enough values or decades."""


class ConfigError(HitchinGlueError):
    """Invalid run configuration."""
