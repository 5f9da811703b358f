"""Exception types raised by the library.

Every error that reflects a bad input value (as opposed to a malformed
command line) derives from ``DomainError`` so callers can catch the whole
family at once.
"""


class DomainError(ValueError):
    """Base class for domain errors."""


class DegenerateDistributionError(DomainError):
    """The revenue curve is identically zero."""


class UnsupportedDistributionError(DomainError):
    """The operation is not defined for this kind of distribution."""


class ZeroDensityError(DomainError):
    """A density-based quantity was requested where the density vanishes."""


class OutOfRangeError(DomainError):
    """A revenue level above the monopoly revenue was requested."""


class InvalidPointError(DomainError):
    """A raw menu point lies outside [0, 1] or has a negative price."""


class InvalidMenuError(DomainError):
    """Breakpoints do not describe a proper (convex, monotone) menu."""


class UnavailableAllocationError(DomainError):
    """An allocation above the largest offered probability was requested."""


class InvalidThresholdError(DomainError):
    """The threshold type lies below the lottery price."""


class ZeroDemandError(DomainError):
    """The reference type buys nothing from the menu."""


class IrregularDistributionError(DomainError):
    """The distribution is neither regular nor DMR."""


class InvalidParameterError(DomainError):
    """A distribution or menu parameter is outside its allowed range."""


class SpecError(ValueError):
    """A JSON distribution or menu spec could not be parsed."""


class ConsistencyError(RuntimeError):
    """A structural property of the buyer's choice failed a numerical cross-check."""
