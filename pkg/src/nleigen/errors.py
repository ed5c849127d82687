"""Exception hierarchy shared by all modules."""


class NLEigenError(Exception):
    """Base class for library errors."""


class InputError(NLEigenError, ValueError):
    """Arguments have the wrong shape, type or range."""


class UnsupportedOperatorError(NLEigenError):
    """The operation needs a rotationally invariant operator."""


class CoercivityError(NLEigenError):
    """The coercivity profile never turns negative on the scanned range."""


class MissingParameterError(NLEigenError, ValueError):
    """A formula needs a parameter the caller did not supply."""


class DomainError(NLEigenError, ValueError):
    """The computational domain is empty or malformed."""


class GeometryError(NLEigenError, ValueError):
    """A requested ball does not fit inside the domain."""


class PreconditionError(NLEigenError, ValueError):
    """Input fields violate a check's precondition."""


class NumericalError(NLEigenError, ArithmeticError):
    """NaN, overflow or a failed inversion during a solve.

    The offending state (if any) is kept in ``state``.
    """

    def __init__(self, message, state=None, diagnostics=None):
        super().__init__(message)
        self.state = state
        self.diagnostics = diagnostics or {}


class SearchFailureError(NLEigenError):
    """No sign change found while bracketing an eigenvalue."""


class InconsistentSchemeError(NLEigenError):
    """A parameter guaranteed to be feasible produced a blow-up."""


class ConfigError(NLEigenError, ValueError):
    """A run configuration failed validation."""
