"""Exception types shared across the package."""


class ShapBoundError(Exception):
    """Base class for all package-specific errors."""


class ParseError(ShapBoundError, ValueError):
    """A document (network JSON, CSV, groups file) is malformed."""


class DimensionError(ShapBoundError, ValueError):
    """Array shapes are inconsistent with the declared dimensions."""


class PreconditionError(ShapBoundError, ValueError):
    """An operation was called on arguments violating its precondition."""


class DomainError(ShapBoundError, ValueError):
    """A numeric argument lies outside the operation's domain."""


class EmptyQueueError(ShapBoundError, LookupError):
    """Pop was attempted on an empty partition queue."""


class CategoryError(ShapBoundError, RuntimeError):
    """A branch fell into an impossible feature category during assembly."""


class NoFreeFeatureError(ShapBoundError, ValueError):
    """A split was requested on a branch with no free features."""


class TooManyFeaturesError(ShapBoundError, ValueError):
    """Brute-force enumeration was requested beyond the feature guard."""


class ConfigError(ShapBoundError, ValueError):
    """The engine configuration is invalid (e.g. no stop criterion)."""
