"""Exception types shared across the package."""


class SpecAEError(Exception):
    """Base class for all errors raised by specae."""


class DimensionError(SpecAEError, ValueError):
    """Operand shapes are incompatible."""


class DomainError(SpecAEError, ValueError):
    """An elementwise function was evaluated outside its domain."""


class ContractError(SpecAEError, ValueError):
    """A precondition of an operation was violated."""


class NumericalError(SpecAEError, ArithmeticError):
    """A numerical routine failed (non-finite loss, failed factorization)."""


class ParseError(SpecAEError, ValueError):
    """A dataset or config file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class UnsupportedOperation(SpecAEError):
    """The requested operation does not apply to the given input."""
