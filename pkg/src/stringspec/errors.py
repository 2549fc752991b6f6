"""Exception hierarchy.

Numerical failures derive from :class:`NumericalError` so callers (the CLI in
particular) can tell them apart from bad input.
"""


class StringSpecError(Exception):
    """Base class for all package errors."""


class ConfigError(StringSpecError):
    """Invalid or unparseable user configuration."""


class DimensionMismatch(StringSpecError, ValueError):
    pass


class NumericalError(StringSpecError):
    """A computation could not produce a trustworthy result."""


class QuadratureNotConverged(NumericalError):
    pass


class NonPositiveDensity(NumericalError):
    pass


class ComplexSpectrum(NumericalError):
    pass


class NoiseDestroyedOrdering(NumericalError):
    pass


class ScaleTooLarge(NumericalError):
    pass


class SpectralRadiusExceeded(NumericalError):
    pass


class ZeroJacobian(NumericalError):
    pass


class NonPositiveGuess(NumericalError):
    pass


class DivergedResidual(NumericalError):
    pass


class PositivityWarning(UserWarning):
    """Reconstructed density is not positive everywhere on the check grid."""
