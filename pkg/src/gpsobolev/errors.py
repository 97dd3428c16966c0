"""Exception hierarchy shared by all modules."""


class GPSobolevError(Exception):
    """Base class for every error raised by gpsobolev."""


class ConfigurationError(GPSobolevError, ValueError):
    """Invalid parameters, grid settings or run configuration."""


class DomainError(GPSobolevError, ValueError):
    """A point lies outside the declared domain of a kernel."""


class UnsupportedDerivative(GPSobolevError):
    """The kernel provides no closed-form derivative of the requested order.

    Callers are expected to fall back to finite differences.
    """


class NotPositiveDefinite(GPSobolevError):
    """A diagonal or spectrum is negative beyond tolerance."""


class MarginTooSmall(GPSobolevError):
    """A difference stencil leaves the grid from an interior node."""


class NumericError(GPSobolevError):
    """An eigensolve or other numerical routine failed."""
