"""Shared exception types."""


class BlabError(Exception):
    """Base class for every error this package raises on purpose."""


class InvalidInputError(BlabError, ValueError):
    """Raised when arguments violate a documented precondition."""


class OutOfWindowError(InvalidInputError):
    """Point or cube falls outside the enumerated window."""


class SingularityError(InvalidInputError):
    """Kernel evaluation requested too close to the diagonal."""


class UnsupportedOrderError(InvalidInputError):
    """Derivative order not supported by the evaluator."""


class DegenerateMeasureError(BlabError, RuntimeError):
    """Moment matrix lost rank; the weighted measure degenerated numerically."""


class SignViolationError(BlabError, RuntimeError):
    """A kernel that must be sign-constant on a region changed sign."""


class NoPartnerFoundError(BlabError, RuntimeError):
    """Partner-cube search exhausted its candidate list."""


class SchemaError(BlabError, ValueError):
    """Configuration dictionary failed validation."""
