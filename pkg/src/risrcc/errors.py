"""Exception hierarchy.

Every exception carries the CLI exit code it maps to, so the command-line
layer can translate failures without a lookup table.
"""


class RisSimError(Exception):
    exit_code = 1


class InvalidArgumentError(RisSimError, ValueError):
    exit_code = 2


class GeometryError(InvalidArgumentError):
    """Degenerate or physically invalid geometry (coincident points, back side of the RIS...)."""


class ConfigurationError(InvalidArgumentError):
    pass


class NumericalError(RisSimError, ArithmeticError):
    exit_code = 3


class SingularFIMError(NumericalError):
    """Fisher information is not invertible (unobservable parameter)."""


class EstimationError(NumericalError):
    """A fit did not converge or the design is rank deficient."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DataIOError(RisSimError, OSError):
    exit_code = 4
