"""Exception types raised by kernelsvm."""


class ParseError(ValueError):
    """Malformed LibSVM input. ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class SolverError(RuntimeError):
    """A solver could not produce a model."""


class ConvergenceWarning(UserWarning):
    """A solver hit its iteration cap before meeting its tolerance."""
