"""Exceptions raised by heapscope."""

from __future__ import annotations

from pathlib import Path
from typing import Optional


class HeapscopeError(Exception):
    """Base class for heapscope errors."""


class SampleFileError(HeapscopeError, ValueError):
    """A sample, trace or timer file could not be parsed."""

    def __init__(self, message: str, path: Optional[Path | str] = None, line_number: Optional[int] = None) -> None:
        self.path = str(path) if path is not None else None
        self.line_number = line_number
        where = ""
        if self.path is not None:
            where = f"{self.path}:{line_number}: " if line_number is not None else f"{self.path}: "
        super().__init__(f"{where}{message}")


class FormatVersionError(SampleFileError):
    """File was written by an incompatible format version."""

    def __init__(self, found: str, expected: str, path: Optional[Path | str] = None) -> None:
        self.found = found
        self.expected = expected
        super().__init__(f"format version {found} not supported (expected {expected})", path, 1)


class UndefinedSlopeError(HeapscopeError, ValueError):
    """Growth slope requested over fewer than two trend points."""


class InvalidTraceError(HeapscopeError, ValueError):
    """A trace failed validation."""

    def __init__(self, message: str, index: Optional[int] = None) -> None:
        self.index = index
        super().__init__(message if index is None else f"event {index}: {message}")
