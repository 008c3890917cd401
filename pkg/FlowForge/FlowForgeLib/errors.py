"""Exception types shared by the FlowForge pipeline.

Row-level CSV problems are not raised one by one: they are collected in a
:class:`RowErrorLog` so a handful of dirty rows does not abort a large export.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

DEFAULT_MAX_ROW_ERRORS = 1000


class FlowForgeError(Exception):
    """Base class for all FlowForge errors."""


class InputParseError(FlowForgeError):
    """An input file cannot be used (bad header, malformed XML, too many bad rows).

    Attributes:
        errors: Row errors collected before the parse was abandoned
    """

    def __init__(self, message: str, errors: list[RowError] | None = None) -> None:
        super().__init__(message)
        self.errors = list(errors or [])


class EmptyResultError(FlowForgeError):
    """A pipeline stage produced nothing to work with."""


class ConfigError(FlowForgeError):
    """A config, profile or rule file is invalid."""


@dataclass(frozen=True)
class RowError:
    """A problem with a single input row.

    Attributes:
        line: 1-based line number in the source file (the header is line 1)
        message: Human-readable description
    """

    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class RowErrorLog:
    """Collects row errors up to a cap.

    Attributes:
        source: Name of the file being parsed, used in messages
        max_errors: Number of errors tolerated before parsing is abandoned
        errors: Errors collected so far
    """

    source: str = "<input>"
    max_errors: int = DEFAULT_MAX_ROW_ERRORS
    errors: list[RowError] = field(default_factory=list)

    def add(self, line: int, message: str) -> None:
        """Record an error, raising once the cap is exceeded.

        Raises:
            InputParseError: If more than ``max_errors`` errors were recorded
        """
        error = RowError(line, message)
        self.errors.append(error)
        logger.warning(f"{self.source}: {error}")
        if len(self.errors) > self.max_errors:
            raise InputParseError(
                f"{self.source}: more than {self.max_errors} bad rows, giving up",
                self.errors,
            )

    def raise_if_any(self) -> None:
        """Report all collected errors together."""
        if self.errors:
            summary = "; ".join(str(e) for e in self.errors[:5])
            more = f" (and {len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
            raise InputParseError(f"{self.source}: {summary}{more}", self.errors)

    def __len__(self) -> int:
        return len(self.errors)
