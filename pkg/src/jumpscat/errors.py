"""Exception hierarchy. The CLI maps these onto exit codes (config=2, data=3, numerical=4)."""


class JumpscatError(Exception):
    """Base class for all package errors."""


class ConfigError(JumpscatError):
    """Invalid or unknown configuration."""


class DataError(JumpscatError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """A row or field could not be parsed; carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AlignmentError(DataError):
    """Inconsistent minute grid (duplicate or conflicting cells)."""


class NumericalError(JumpscatError):
    """A numerical procedure failed or hit a degenerate input."""


class DegenerateVolatilityError(NumericalError):
    """Volatility estimate collapsed to zero (e.g. constant returns)."""


class DegenerateWindowError(NumericalError):
    """A jump window has zero energy at some scale; no embedding exists."""


class ScaleOverflowError(NumericalError):
    """Requested wavelet scale 2^J exceeds the window length."""


class TailRangeError(NumericalError):
    """Too few observations inside the requested tail-fit range."""
