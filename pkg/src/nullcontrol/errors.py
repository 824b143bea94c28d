"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A configuration or setup invariant is violated."""


class ParseError(ValueError):
    """A config file could not be parsed; carries the offending line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class UnknownWeightName(KeyError):
    """Requested weight name is not in the named-weight table."""


class SingularSystemError(RuntimeError):
    """Direct factorization detected a (numerically) rank-deficient system."""


class NoConvergence(RuntimeError):
    """An iterative process exceeded its iteration cap."""


class GrowthViolation(RuntimeError):
    """A constitutive law failed the derivative growth bound."""


class UnsupportedDerivative(ValueError):
    """A weighted norm was requested for a derivative order P1 cannot represent."""
