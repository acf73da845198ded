"""Exception types raised across the package."""


class DomainError(ValueError):
    """Input outside the domain of a numeric primitive (NaN, inf, sigma <= 0)."""


class SaturationError(ArithmeticError):
    """A tail probability underflowed and the requested quantity is unreliable."""


class EvaluationError(ArithmeticError):
    """A user-supplied callable returned a non-finite value."""


class ShapeError(ValueError):
    """Array dimensions do not chain or align."""


class UnsupportedForTraining(ValueError):
    """The network contains a layer that cannot be trained by gradient descent."""


class UndefinedRatioError(ArithmeticError):
    """Weighted mean requested with an all-zero weight vector."""


class BracketError(RuntimeError):
    """The minimum of an objective lies on the boundary of every search bracket."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not converge."""


class DegenerateNetworkError(ArithmeticError):
    """The baseline synaptic power is zero so a normalized ratio is undefined."""


class FormatError(ValueError):
    """A data file has the wrong magic number or layout."""


class LengthError(ValueError):
    """A data file is shorter than its header declares."""


class ParseError(ValueError):
    """A CSV file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
