"""Exception types shared across the package."""


class CausalFieldError(Exception):
    """Base class for errors raised by causalfield."""


class ParameterError(CausalFieldError, ValueError):
    """Invalid argument value (bad geometry of a mask, empty dataset, ...)."""


class GeometryError(CausalFieldError, ValueError):
    """Image or array dimensions incompatible with the requested operation."""


class NumericalError(CausalFieldError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class DegeneracyError(NumericalError):
    """A covariance matrix is singular."""


class FormatError(CausalFieldError, ValueError):
    """A file does not match the expected on-disk format."""
