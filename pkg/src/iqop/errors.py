"""Exception types shared across the toolkit."""


class IqopError(Exception):
    """Base class for every diagnosed failure raised by the toolkit."""


class InvalidArgument(IqopError, ValueError):
    pass


class DegenerateInput(InvalidArgument):
    pass


class InsufficientData(IqopError):
    pass


class FitFailure(IqopError):
    pass


class InfeasibleDesign(IqopError):
    pass


class ParseError(IqopError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ParseError):
    """Record-level validation failure; ``rows`` lists the offending line numbers."""

    def __init__(self, message, rows=()):
        self.rows = list(rows)
        super().__init__(f"{message} (rows {', '.join(map(str, self.rows))})")
