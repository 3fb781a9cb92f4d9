"""Exception types shared across the package."""


class RdeinvError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(RdeinvError, ValueError):
    """Array shapes or signal dimensions are inconsistent."""


class IndexOutOfRange(RdeinvError, IndexError):
    """A grid or field index is outside its valid range."""


class InvalidGrid(RdeinvError, ValueError):
    """A time grid is not strictly increasing or is inconsistent with its data."""


class InvalidParameter(RdeinvError, ValueError):
    """A numeric parameter is outside its admissible range."""


class NonFinite(RdeinvError, ArithmeticError):
    """A computation produced NaN or infinity."""


class RankDeficient(RdeinvError, RuntimeError):
    """The reconstruction matrix does not have full parameter rank."""


class NotConverged(RdeinvError, RuntimeError):
    """An iterative solver exhausted its iteration budget."""


class DegenerateField(RdeinvError, ValueError):
    """A field vanishes where the inversion needs it to be nonzero."""


class OutOfNeighborhood(RdeinvError, RuntimeError):
    """An iterate left the region where the flow inversion is valid."""


class DomainViolation(RdeinvError, ValueError):
    """A state left the domain on which the fields are defined."""


class TrustRegionExceeded(UserWarning):
    """The recovered parameters lie outside the model injectivity ball."""
