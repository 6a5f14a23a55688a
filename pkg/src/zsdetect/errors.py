"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: usage errors exit 1, data/format
errors exit 2, numerical failures exit 3.
"""


class DataFormatError(ValueError):
    """An input file or artifact does not match its documented format."""


class MissingTokenError(DataFormatError):
    """Requested tokens are absent from a word-vector file."""

    def __init__(self, tokens):
        self.tokens = sorted(tokens)
        super().__init__("missing tokens: " + ", ".join(self.tokens))


class NumericalError(RuntimeError):
    """A non-finite value surfaced where finite numbers are required."""
