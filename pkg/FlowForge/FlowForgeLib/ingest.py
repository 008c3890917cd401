"""Ingestion of LMS exports.

This module reads the event and score CSV exports, joins them on
(course ID, user ID) and applies the data quality filters: events without a
score are dropped, scores outside [0, 100] are dropped and courses with too
few events are removed.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from datetime import datetime
from typing import TypeVar, Union

import numpy as np
import pandas as pd

from FlowForgeLib.errors import InputParseError, RowErrorLog
from FlowForgeLib.files import Sink, Source, open_source, source_name, write_text
from FlowForgeLib.grouping import build_case_id
from FlowForgeLib.model import CaseId, CaseScope, RawEvent, ScoredEvent, ScoreRecord, check_raw_id

logger = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S.%f %z"

EVENT_COLUMNS = ("Timestamp", "Course Name", "CourseID", "Event", "Section", "UserID")
SCORE_COLUMNS = ("CourseID", "UserID", "Score")
PREPARED_COLUMNS = (*EVENT_COLUMNS, "Score", "CaseID")

DEFAULT_MIN_COURSE_EVENTS = 100

AnyEvent = TypeVar("AnyEvent", RawEvent, ScoredEvent)


def parse_timestamp(text: str) -> datetime:
    """Parse ``2022-08-30 17:25:20.000 +0200`` into an offset-aware datetime."""
    return datetime.strptime(text, TIMESTAMP_FORMAT)


def format_timestamp(value: datetime) -> str:
    """Inverse of :func:`parse_timestamp` (millisecond precision)."""
    millis = value.microsecond // 1000
    return f"{value.strftime('%Y-%m-%d %H:%M:%S')}.{millis:03d} {value.strftime('%z')}"


def _read_frame(source: Source, expected: Sequence[str]) -> tuple[pd.DataFrame, str]:
    """Read a CSV as trimmed strings and rename its columns to ``expected``.

    Header names match case-insensitively and in any order; a missing or
    unexpected column is fatal. Blank lines are dropped and the frame is
    indexed by the physical line each record starts on, counting line breaks
    inside quoted fields.
    """
    name = source_name(source)
    with open_source(source) as stream:
        try:
            frame = pd.read_csv(
                stream,
                dtype=str,
                keep_default_na=False,
                skipinitialspace=True,
                skip_blank_lines=False,
                encoding="utf-8",
            )
        except pd.errors.EmptyDataError as e:
            raise InputParseError(f"{name}: file has no header row") from e
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise InputParseError(f"{name}: {e}") from e

    by_lower = {str(c).strip().lower(): str(c) for c in frame.columns}
    wanted = {c.lower(): c for c in expected}
    missing = [wanted[k] for k in wanted if k not in by_lower]
    if missing:
        raise InputParseError(f"{name}: missing header column(s): {', '.join(missing)}")
    extra = [by_lower[k] for k in by_lower if k not in wanted]
    if extra:
        raise InputParseError(f"{name}: unexpected header column(s): {', '.join(extra)}")

    header_lines = 1 + sum(str(c).count("\n") for c in frame.columns)
    frame = frame.rename(columns={by_lower[k]: wanted[k] for k in wanted})[list(expected)]
    frame = frame.fillna("")
    spans = np.zeros(len(frame), dtype=np.int64)
    for column in expected:
        text = frame[column].astype(str)
        spans += text.str.count("\n").to_numpy(dtype=np.int64)
        frame[column] = text.str.strip()
    frame.index = header_lines + 1 + np.arange(len(frame)) + np.cumsum(spans) - spans
    return frame[(frame != "").any(axis=1)], name


def parse_event_csv(source: Source, errors: RowErrorLog | None = None) -> list[RawEvent]:
    """Parse an event export.

    Args:
        source: Path or binary stream of the event CSV
        errors: Collector for bad rows. When omitted, bad rows are reported
            together in one :class:`InputParseError` after the whole file was read.

    Returns:
        One RawEvent per good data row, in file order

    Raises:
        InputParseError: On a bad header, or on bad rows (see ``errors``)
    """
    frame, name = _read_frame(source, EVENT_COLUMNS)
    collector = errors if errors is not None else RowErrorLog(source=name)

    events: list[RawEvent] = []
    rows = frame.itertuples(index=True, name=None)
    for index, (line, stamp, course_name, course_id, event_name, section, user_id) in (
        enumerate(rows)
    ):
        try:
            timestamp = parse_timestamp(stamp)
        except ValueError:
            collector.add(line, f"malformed timestamp {stamp!r}")
            continue
        try:
            events.append(
                RawEvent(
                    timestamp=timestamp,
                    course_name=course_name,
                    course_id=course_id,
                    event_name=event_name,
                    section=section or None,
                    user_id=user_id,
                    row_index=index,
                )
            )
        except ValueError as e:
            collector.add(line, str(e))

    if errors is None:
        collector.raise_if_any()
    logger.info(f"Parsed {len(events)} events from {name}")
    return events


@dataclass
class ScoreTable:
    """Parsed score records plus the out-of-range count.

    Attributes:
        records: Scores within [0, 100]
        dropped_out_of_range: Rows dropped because the score was outside [0, 100]
    """

    records: list[ScoreRecord] = field(default_factory=list)
    dropped_out_of_range: int = 0

    def __iter__(self) -> Iterator[ScoreRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def parse_score_csv(source: Source, errors: RowErrorLog | None = None) -> ScoreTable:
    """Parse a score export, dropping and counting scores outside [0, 100].

    Raises:
        InputParseError: On a bad header, or on non-numeric scores when no
            ``errors`` collector is given
    """
    frame, name = _read_frame(source, SCORE_COLUMNS)
    collector = errors if errors is not None else RowErrorLog(source=name)

    table = ScoreTable()
    for line, course_id, user_id, text in frame.itertuples(index=True, name=None):
        try:
            score = float(text)
        except ValueError:
            score = math.nan
        if not math.isfinite(score):
            collector.add(line, f"non-numeric score {text!r}")
            continue
        try:
            check_raw_id("course_id", course_id)
            check_raw_id("user_id", user_id)
        except ValueError as e:
            collector.add(line, str(e))
            continue
        if not 0.0 <= score <= 100.0:
            table.dropped_out_of_range += 1
            logger.debug(f"{name}: line {line}: score {score} outside [0, 100], dropped")
            continue
        table.records.append(ScoreRecord(course_id, user_id, score))

    if errors is None:
        collector.raise_if_any()
    logger.info(
        f"Parsed {len(table)} scores from {name} "
        f"({table.dropped_out_of_range} outside [0, 100] dropped)"
    )
    return table


@dataclass
class JoinReport:
    """Accounting of the event/score join.

    Attributes:
        joined_events: Events that found a score
        dropped_events: Events without a matching score
        unmatched_keys: Distinct (course ID, user ID) pairs of the dropped events
        unused_scores: Score records that matched no event
    """

    joined_events: int = 0
    dropped_events: int = 0
    unmatched_keys: int = 0
    unused_scores: int = 0

    def to_rows(self) -> list[tuple[str, int]]:
        return [
            ("joined_events", self.joined_events),
            ("dropped_events", self.dropped_events),
            ("unmatched_keys", self.unmatched_keys),
            ("unused_scores", self.unused_scores),
        ]


def join_events_scores(
    events: Iterable[RawEvent | ScoredEvent],
    scores: Iterable[ScoreRecord],
    scope: CaseScope = CaseScope.PER_COURSE,
) -> tuple[list[ScoredEvent], JoinReport]:
    """Inner-join events with scores on (course ID, user ID).

    Scored events passed back in are unwrapped first, so joining an output
    again with the same scores changes nothing.

    Raises:
        InputParseError: If two score rows share a (course ID, user ID) key
    """
    by_key: dict[tuple[str, str], float] = {}
    for record in scores:
        if record.key in by_key:
            raise InputParseError(
                f"ambiguous grade: duplicate score for course {record.course_id!r}, "
                f"user {record.user_id!r}"
            )
        by_key[record.key] = record.score

    report = JoinReport()
    joined: list[ScoredEvent] = []
    used: set[tuple[str, str]] = set()
    unmatched: set[tuple[str, str]] = set()
    case_ids: dict[tuple[str, str], CaseId] = {}
    for item in events:
        event = item.event if isinstance(item, ScoredEvent) else item
        key = (event.course_id, event.user_id)
        score = by_key.get(key)
        if score is None:
            report.dropped_events += 1
            unmatched.add(key)
            continue
        case_id = case_ids.get(key)
        if case_id is None:
            case_id = case_ids[key] = build_case_id(event.course_id, event.user_id, scope)
        joined.append(ScoredEvent(event, score, case_id))
        used.add(key)

    report.joined_events = len(joined)
    report.unmatched_keys = len(unmatched)
    report.unused_scores = len(by_key) - len(used)
    logger.info(
        f"Joined {report.joined_events} events with scores, "
        f"dropped {report.dropped_events} events without a score"
    )
    return joined, report


@dataclass
class FilterReport:
    """Courses removed by the minimum-events filter.

    Attributes:
        min_course_events: Threshold that was applied
        removed_courses: Course ID -> number of events removed
    """

    min_course_events: int = DEFAULT_MIN_COURSE_EVENTS
    removed_courses: dict[str, int] = field(default_factory=dict)

    @property
    def removed_events(self) -> int:
        return sum(self.removed_courses.values())

    def to_rows(self) -> list[tuple[str, int]]:
        return sorted(self.removed_courses.items())


def apply_quality_filters(
    events: Sequence[AnyEvent],
    min_course_events: int = DEFAULT_MIN_COURSE_EVENTS,
) -> tuple[list[AnyEvent], FilterReport]:
    """Remove every course with fewer than ``min_course_events`` events.

    Works on raw or scored events so it can run before or after the join.
    """
    if min_course_events < 1:
        raise ValueError("min_course_events must be at least 1")

    per_course = Counter(e.course_id for e in events)
    small = {c: n for c, n in per_course.items() if n < min_course_events}
    kept = [e for e in events if e.course_id not in small]
    report = FilterReport(min_course_events=min_course_events, removed_courses=small)
    logger.info(
        f"Removed {len(small)} course(s) with fewer than {min_course_events} events "
        f"({report.removed_events} events)"
    )
    return kept, report


def select_course(events: Iterable[AnyEvent], course_name: str) -> list[AnyEvent]:
    """Keep only events of the course titled ``course_name`` (exact, trimmed)."""
    wanted = course_name.strip()
    selected = [e for e in events if e.course_name == wanted]
    logger.info(f"Selected {len(selected)} events of course {wanted!r}")
    return selected


@dataclass(frozen=True)
class DatasetSummary:
    """Size statistics of a joined event set."""

    events: int
    courses: int
    students: int
    graded_pairs: int
    mean_events_per_course: float
    mean_events_per_student_in_course: float

    def to_rows(self) -> list[tuple[str, Union[int, float]]]:
        return [
            ("events", self.events),
            ("courses", self.courses),
            ("students", self.students),
            ("graded_pairs", self.graded_pairs),
            ("mean_events_per_course", self.mean_events_per_course),
            ("mean_events_per_student_in_course", self.mean_events_per_student_in_course),
        ]


def summarize_dataset(events: Sequence[ScoredEvent]) -> DatasetSummary:
    """Count events, courses, students and graded (course, student) pairs."""
    courses = {e.course_id for e in events}
    students = {e.user_id for e in events}
    pairs = {(e.course_id, e.user_id) for e in events}
    return DatasetSummary(
        events=len(events),
        courses=len(courses),
        students=len(students),
        graded_pairs=len(pairs),
        mean_events_per_course=len(events) / len(courses) if courses else 0.0,
        mean_events_per_student_in_course=len(events) / len(pairs) if pairs else 0.0,
    )


def _event_record(event: RawEvent) -> list[str]:
    return [
        format_timestamp(event.timestamp),
        event.course_name,
        event.course_id,
        event.event_name,
        event.section or "",
        event.user_id,
    ]


def write_event_csv(events: Iterable[RawEvent], sink: Sink) -> None:
    """Write events in the export format read by :func:`parse_event_csv`."""
    frame = pd.DataFrame([_event_record(e) for e in events], columns=list(EVENT_COLUMNS))
    write_text(sink, frame.to_csv(index=False, lineterminator="\n"))


def write_score_csv(scores: Iterable[ScoreRecord], sink: Sink) -> None:
    """Write scores in the export format read by :func:`parse_score_csv`."""
    frame = pd.DataFrame(
        [(s.course_id, s.user_id, repr(s.score)) for s in scores], columns=list(SCORE_COLUMNS)
    )
    write_text(sink, frame.to_csv(index=False, lineterminator="\n"))


def write_prepared_csv(events: Iterable[ScoredEvent], sink: Sink) -> None:
    """Write the intermediate file: the six export columns plus score and case ID."""
    frame = pd.DataFrame(
        [[*_event_record(e.event), repr(e.score), e.case_id.value] for e in events],
        columns=list(PREPARED_COLUMNS),
    )
    write_text(sink, frame.to_csv(index=False, lineterminator="\n"))


def read_prepared_csv(source: Source) -> list[ScoredEvent]:
    """Read a file written by :func:`write_prepared_csv`.

    The file was produced by FlowForge, so any bad row is fatal.
    """
    frame, name = _read_frame(source, PREPARED_COLUMNS)
    events: list[ScoredEvent] = []
    for index, row in enumerate(frame.itertuples(index=True, name=None)):
        line, stamp, course_name, course_id, event_name, section, user_id, score, case = row
        try:
            raw = RawEvent(
                timestamp=parse_timestamp(stamp),
                course_name=course_name,
                course_id=course_id,
                event_name=event_name,
                section=section or None,
                user_id=user_id,
                row_index=index,
            )
            events.append(ScoredEvent(raw, float(score), CaseId.parse(case)))
        except ValueError as e:
            raise InputParseError(f"{name}: line {line}: {e}") from e
    logger.info(f"Read {len(events)} prepared events from {name}")
    return events
