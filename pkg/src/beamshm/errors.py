"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericalError -> 3,
DimensionMismatchError -> 4. Everything else is a bug.
"""


class BeamShmError(Exception):
    """Base class for all package errors."""


class ConfigError(BeamShmError):
    """Invalid configuration, schema violation, or missing input artifact."""


class InvalidModelError(ConfigError):
    """Beam model with non-positive or inconsistent physical parameters."""


class LayoutError(ConfigError):
    """Sensor layout that does not coincide with mesh nodes."""


class NumericalError(BeamShmError):
    """Numerical failure: eigensolver breakdown, non-finite loss, degenerate covariance."""


class SingularMassError(NumericalError):
    """Mass matrix is not positive definite."""


class EigensolverError(NumericalError):
    """Generalized eigensolver failed to converge."""


class UndefinedMacError(NumericalError):
    """MAC requested for a zero-length mode shape vector."""


class SpecError(ConfigError):
    """Network specification inconsistent with data or weights."""


class DimensionMismatchError(BeamShmError):
    """Artifacts disagree on n modes / m sensor components."""
