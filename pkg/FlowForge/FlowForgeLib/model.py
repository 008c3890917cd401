"""Domain types shared by the whole pipeline.

This module provides immutable dataclasses for clickstream rows, scores,
case identifiers and time-ordered event logs.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from typing import NamedTuple

logger = logging.getLogger(__name__)

# Joins course and user IDs in cross-course case IDs; forbidden inside raw IDs
CASE_ID_SEPARATOR = "::"


def check_raw_id(name: str, value: str) -> None:
    """Raises ValueError if a course or user ID is empty or contains the separator."""
    if not value:
        raise ValueError(f"{name} must not be empty")
    if CASE_ID_SEPARATOR in value:
        raise ValueError(f"{name} {value!r} contains the reserved sequence {CASE_ID_SEPARATOR!r}")


class CaseScope(Enum):
    """How case IDs are formed."""

    PER_COURSE = "course"
    CROSS_COURSE = "cross"


class Aggregation(Enum):
    """Which event field becomes the activity label."""

    ACTIVITY = "activity"
    SECTION = "section"
    CROSS_COURSE_SECTION = "cross_course_section"

    @property
    def is_section_level(self) -> bool:
        return self is not Aggregation.ACTIVITY


class GroupLabel(Enum):
    """Performance cohort of a case."""

    A = "A"  # higher-performing
    B = "B"  # lower-performing


@dataclass(frozen=True)
class RawEvent:
    """One clickstream row as exported from the LMS.

    Attributes:
        timestamp: Offset-aware instant with millisecond precision
        course_name: Course title
        course_id: Opaque course identifier
        event_name: Activity label (e.g. "Download 2")
        section: Section title, None when the export cell was empty
        user_id: Opaque (anonymized) student identifier
        row_index: 0-based position in the source file, used to break timestamp ties
    """

    timestamp: datetime
    course_name: str
    course_id: str
    event_name: str
    section: str | None
    user_id: str
    row_index: int = 0

    def __post_init__(self) -> None:
        check_raw_id("course_id", self.course_id)
        check_raw_id("user_id", self.user_id)
        if self.timestamp.utcoffset() is None:
            raise ValueError(f"timestamp {self.timestamp} has no UTC offset")


@dataclass(frozen=True)
class ScoreRecord:
    """Final score of one student in one course.

    Attributes:
        course_id: Opaque course identifier
        user_id: Opaque student identifier
        score: Final score, 0 to 100 inclusive
    """

    course_id: str
    user_id: str
    score: float

    def __post_init__(self) -> None:
        check_raw_id("course_id", self.course_id)
        check_raw_id("user_id", self.user_id)
        if not 0.0 <= self.score <= 100.0:
            raise ValueError(f"score {self.score} outside [0, 100]")

    @property
    def key(self) -> tuple[str, str]:
        return (self.course_id, self.user_id)


@dataclass(frozen=True)
class CaseId:
    """Identifier of one process instance.

    Attributes:
        scope: Per-course (student ID) or cross-course (course ID + student ID)
        value: The identifier text written to XES
    """

    scope: CaseScope
    value: str

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value: str) -> CaseId:
        """Recover a case ID from its text form; the separator marks cross-course IDs."""
        scope = CaseScope.CROSS_COURSE if CASE_ID_SEPARATOR in value else CaseScope.PER_COURSE
        return cls(scope, value)


@dataclass(frozen=True)
class ScoredEvent:
    """A clickstream row joined with the student's final score.

    Attributes:
        event: The original row
        score: Final score of the student in the row's course
        case_id: Case the row belongs to
    """

    event: RawEvent
    score: float
    case_id: CaseId

    @property
    def timestamp(self) -> datetime:
        return self.event.timestamp

    @property
    def course_id(self) -> str:
        return self.event.course_id

    @property
    def course_name(self) -> str:
        return self.event.course_name

    @property
    def user_id(self) -> str:
        return self.event.user_id

    @property
    def event_name(self) -> str:
        return self.event.event_name

    @property
    def section(self) -> str | None:
        return self.event.section

    @property
    def row_index(self) -> int:
        return self.event.row_index

    def with_section(self, section: str | None) -> ScoredEvent:
        """Return a copy with the section title replaced."""
        return replace(self, event=replace(self.event, section=section))


class TraceEvent(NamedTuple):
    """A single event inside a trace."""

    timestamp: datetime
    activity: str


class EventRow(NamedTuple):
    """Input row for :meth:`EventLog.from_rows`.

    ``order`` is the row's position in its source and breaks timestamp ties.
    """

    case_id: CaseId
    timestamp: datetime
    activity: str
    order: int


@dataclass(frozen=True)
class Trace:
    """Time-ordered events of one case.

    Attributes:
        case_id: The case
        events: Events sorted by timestamp
    """

    case_id: CaseId
    events: tuple[TraceEvent, ...]

    def __post_init__(self) -> None:
        if not self.events:
            raise ValueError(f"trace {self.case_id} is empty")
        for earlier, later in zip(self.events, self.events[1:]):
            if later.timestamp < earlier.timestamp:
                raise ValueError(f"trace {self.case_id} is not time-ordered")

    @property
    def labels(self) -> list[str]:
        return [e.activity for e in self.events]

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class EventLog:
    """Traces of one aggregation level.

    Attributes:
        aggregation: Which field the activity labels come from
        traces: Traces ordered by their first event (ties by case ID)
    """

    aggregation: Aggregation
    traces: tuple[Trace, ...] = ()

    def __post_init__(self) -> None:
        seen: set[CaseId] = set()
        for trace in self.traces:
            if trace.case_id in seen:
                raise ValueError(f"duplicate case ID in event log: {trace.case_id}")
            seen.add(trace.case_id)

    @classmethod
    def from_rows(cls, aggregation: Aggregation, rows: Iterable[EventRow]) -> EventLog:
        """Group rows into traces.

        Events are stable-sorted by (timestamp, order) within each case and
        traces by (first timestamp, case ID), so any permutation of the same
        rows builds an equal log.
        """
        grouped: dict[CaseId, list[EventRow]] = {}
        for row in rows:
            grouped.setdefault(row.case_id, []).append(row)

        traces = []
        for case_id, case_rows in grouped.items():
            case_rows.sort(key=lambda r: (r.timestamp, r.order))
            traces.append(
                Trace(case_id, tuple(TraceEvent(r.timestamp, r.activity) for r in case_rows))
            )
        traces.sort(key=lambda t: (t.events[0].timestamp, t.case_id.value))
        return cls(aggregation, tuple(traces))

    def with_traces(self, traces: Iterable[Trace]) -> EventLog:
        """Return a log of the same aggregation holding ``traces``."""
        return EventLog(self.aggregation, tuple(traces))

    @property
    def case_ids(self) -> list[CaseId]:
        return [t.case_id for t in self.traces]

    @property
    def case_count(self) -> int:
        return len(self.traces)

    @property
    def event_count(self) -> int:
        return sum(len(t) for t in self.traces)

    def __iter__(self) -> Iterator[Trace]:
        return iter(self.traces)

    def __len__(self) -> int:
        return len(self.traces)
