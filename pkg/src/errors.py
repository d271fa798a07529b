"""
Exception hierarchy for the compressive spectral reconstruction toolkit.

The CLI maps these onto process exit codes (see src/cli/csi_cli.py).
"""

from typing import Optional


class CSIError(Exception):
    """Base class for every error raised by the toolkit"""


class ShapeError(CSIError, ValueError):
    """Array extents do not agree with what an operation requires"""


class ArgumentError(CSIError, ValueError):
    """A scalar argument is outside its allowed range"""


class InvariantError(CSIError):
    """An internal consistency check failed"""


class UsageError(CSIError, RuntimeError):
    """An object was used in a way its contract forbids"""


class OracleRefusalError(CSIError):
    """The dense sensing matrix would exceed the configured column cap"""


class NumericalError(CSIError, ArithmeticError):
    """A non-finite value appeared during an iterative solve"""


class FormatError(CSIError):
    """A binary or text file does not follow its declared format"""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
