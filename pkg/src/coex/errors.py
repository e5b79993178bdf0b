"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CoexError(Exception):
    """Base class for all errors raised by this package."""


class NameResolutionError(CoexError):
    """An object or attribute name is not part of the context it was used with."""


class IncompatibleError(CoexError):
    """Two values do not share the attribute universe an operation requires."""


class ConflictError(CoexError):
    """Two contexts carry contradictory cells (cross vs blank).

    ``conflicts`` holds the offending (object, attribute) pairs.
    """

    def __init__(self, message: str, conflicts=()):
        super().__init__(message)
        self.conflicts = frozenset(conflicts)


class CapacityError(CoexError):
    """An enumeration would exceed its configured bound."""


class ParseError(CoexError):
    """A file or text payload is malformed. Carries line (1-based) when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column


class ProtocolError(CoexError):
    """An answer payload violates the exploration protocol."""


class InvalidCounterexampleError(ProtocolError):
    """A submitted row does not contradict the question it answers."""

    def __init__(self, message: str, row: str | None = None):
        super().__init__(message)
        self.row = row


class StaleQuestionError(CoexError):
    """An answer refers to a question that is not currently pending."""


class StateError(CoexError):
    """An operation was invoked on a state that does not accept it."""


class ReplayError(CoexError):
    """An event log could not be replayed. Carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


class ValidationError(CoexError):
    """Input data (expert files, strategy configuration, rosters) failed validation."""
