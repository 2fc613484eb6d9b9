"""Exception hierarchy shared by the library and the CLI."""


class PaclError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(PaclError, ValueError):
    pass


class DomainError(PaclError, ArithmeticError):
    """A model evaluation left the representable floating-point range."""


class NumericFailure(PaclError, ArithmeticError):
    """An agent update produced non-finite components."""

    def __init__(self, message, agent=None, step=None):
        super().__init__(message)
        self.agent = agent
        self.step = step


class DegenerateWeights(PaclError, ArithmeticError):
    """Weighting coefficients are nonpositive, non-finite or sum to zero."""


class ParseError(PaclError, ValueError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
