"""Exception hierarchy shared by all modules.

The CLI maps these onto its exit codes, so library code raises the most
specific class that applies.
"""


class NleitError(Exception):
    """Base class for every error raised on purpose by this package."""


class InvalidInputError(NleitError, ValueError):
    """A precondition on an argument was violated."""


class DegenerateConfigurationError(NleitError, ArithmeticError):
    """The numerical problem is singular or ill-posed for the given inputs."""


class TruncationError(NleitError):
    """A Fock-space truncation is too small for the requested state."""

    def __init__(self, message: str, suggested_dim: int | None = None):
        super().__init__(message)
        self.suggested_dim = suggested_dim


class ConfigError(NleitError):
    """A run configuration could not be parsed or validated."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if key is not None:
            loc.append(f"key '{key}'")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.key = key


class DataFormatError(NleitError):
    """An input data file does not follow its documented format."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(f"{message} (row {row})" if row is not None else message)
        self.row = row
