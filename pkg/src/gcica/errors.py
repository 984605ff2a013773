class ValidationError(ValueError):
    """Bad input: shapes, signs, ranges, malformed files."""


class NumericalError(ArithmeticError):
    """A numerical routine could not produce a usable result."""


class NotPositiveDefiniteError(NumericalError):
    pass


class TrustRegionError(NotPositiveDefiniteError):
    """The linearized covariance lost positive definiteness; shrink the trust radius."""
