"""Exception hierarchy mapped onto the CLI exit-code contract."""

from __future__ import annotations

from typing import Optional


class MlrhError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1


class UsageError(MlrhError):
    """Invalid arguments: shapes, ranges or option values."""

    exit_code = 2


class DataError(MlrhError):
    """Input data that cannot be used as given."""

    exit_code = 3


class FormatError(DataError):
    """A binary artifact that does not conform to its file format."""

    def __init__(self, message: str, offset: Optional[int] = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class NumericalError(MlrhError):
    """A factorization, eigensolver or kernel estimate that failed numerically."""

    exit_code = 4
