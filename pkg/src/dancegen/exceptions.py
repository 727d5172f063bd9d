"""Error types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not satisfy an operation's contract."""


class NumericError(ArithmeticError):
    """Non-finite values where finite data is required."""


class DegenerateInputError(ValueError):
    """Input carries no usable signal (constant axis, absent joint, ...)."""


class GraphError(RuntimeError):
    """backward() called on something that is not a registered-op output."""


class FormatError(ValueError):
    """Malformed tensor file, checkpoint, or manifest."""
