"""Exception hierarchy shared across the pipeline."""


class BreakscoreError(Exception):
    """Base class for all pipeline errors."""


class ParseError(BreakscoreError):
    """Malformed alignment or dataset input. Carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(BreakscoreError):
    """Structurally valid input that violates a contract (bad labels, vocab mismatch, ...)."""


class NumericError(BreakscoreError):
    """Non-finite loss or otherwise numerically broken training state."""
