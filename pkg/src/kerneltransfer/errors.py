"""Exception types shared across the package."""


class KernelTransferError(Exception):
    """Base class for all package errors."""


class InputError(KernelTransferError, ValueError):
    """Caller supplied arguments outside an operation's contract."""


class DegenerateInputError(InputError):
    """Inputs are structurally degenerate (zero vectors, zero norms)."""


class NumericError(KernelTransferError, ArithmeticError):
    """A numerical invariant was violated (non-finite values, conditioning)."""


class DegenerateFitError(InputError):
    """A fit has no well-defined solution (e.g. fewer than two distinct x)."""


class ParseError(KernelTransferError, ValueError):
    """A data file could not be parsed; carries location information."""

    def __init__(self, message: str, *, line: int | None = None,
                 column: int | None = None, offset: int | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        if offset is not None:
            loc.append(f"byte offset {offset}")
        super().__init__(message + (f" ({', '.join(loc)})" if loc else ""))
        self.line = line
        self.column = column
        self.offset = offset


class ConfigError(KernelTransferError, ValueError):
    """The experiment configuration is invalid."""
