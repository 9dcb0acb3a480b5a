"""
Exception hierarchy

Every failure the library raises on purpose derives from PercoboundError, so the
CLI can map it to an exit code in one place.
"""

from typing import Optional


class PercoboundError(Exception):
    """Base class for all deliberate percobound failures"""


class ParameterError(PercoboundError, ValueError):
    """Invalid parameters or inputs (exit code 1)"""

    def __init__(self, message: str, constraint: Optional[str] = None):
        super().__init__(message)
        self.constraint = constraint


class DeadVertexError(ParameterError):
    """Query on a vertex that is unknown or removed in the view"""

    def __init__(self, vertex: int):
        super().__init__(f"dead vertex: {vertex}", constraint="vertex live in view")
        self.vertex = vertex


class GraphFormatError(ParameterError):
    """Malformed graph file; carries the offending line number when known"""

    def __init__(self, message: str, line: Optional[int] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}", constraint="graph file format")
        self.line = line


class TruncationError(PercoboundError, RuntimeError):
    """A query would leave the materialized truncation (exit code 2)"""

    def __init__(self, message: str = "truncation too small"):
        if "truncation too small" not in message:
            message = f"truncation too small: {message}"
        super().__init__(message)


class ExactCapError(PercoboundError, RuntimeError):
    """Exact enumeration requested over too many vertices (exit code 2)"""

    def __init__(self, size: int, cap: int):
        super().__init__(
            f"exact enumeration over {size} vertices exceeds the cap of {cap}; "
            f"use the Monte Carlo method instead"
        )
        self.size = size
        self.cap = cap


class InvariantViolation(PercoboundError, AssertionError):
    """A pathwise coupling or disjointness property failed at run time"""
