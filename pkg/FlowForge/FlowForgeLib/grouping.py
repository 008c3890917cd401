"""Case construction and cohort splitting.

Cases are formed per aggregation level (student ID within a course, or
course ID + student ID across courses) and split into a higher-performing
group A and a lower-performing group B around the median score.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from FlowForgeLib.errors import EmptyResultError
from FlowForgeLib.model import (
    CASE_ID_SEPARATOR,
    Aggregation,
    CaseId,
    CaseScope,
    EventLog,
    EventRow,
    GroupLabel,
    ScoredEvent,
    check_raw_id,
)

logger = logging.getLogger(__name__)


def median(values: Iterable[float]) -> float:
    """Sample median; the mean of the two middle order statistics for even n.

    Raises:
        ValueError: If ``values`` is empty
    """
    array = np.fromiter(values, dtype=float)
    if array.size == 0:
        raise ValueError("median of an empty sequence")
    return float(np.median(array))


def build_case_id(course_id: str, user_id: str, scope: CaseScope) -> CaseId:
    """Build the case ID of a (course, student) pair.

    Raises:
        ValueError: If an ID is empty or contains the separator
    """
    check_raw_id("course_id", course_id)
    check_raw_id("user_id", user_id)

    if scope is CaseScope.PER_COURSE:
        return CaseId(scope, user_id)
    return CaseId(scope, f"{course_id}{CASE_ID_SEPARATOR}{user_id}")


class MedianSplit(NamedTuple):
    """Result of :func:`median_split`."""

    group_a: frozenset[CaseId]
    group_b: frozenset[CaseId]
    median: float

    def label_of(self, case_id: CaseId) -> GroupLabel:
        return GroupLabel.A if case_id in self.group_a else GroupLabel.B


def median_split(cases: Sequence[tuple[CaseId, float]], tie_to_a: bool = False) -> MedianSplit:
    """Split cases around the median score.

    A case goes to group A when its score is above the median, otherwise to
    group B. With ``tie_to_a`` a score equal to the median also goes to A.

    Raises:
        ValueError: If ``cases`` is empty or a case appears twice
    """
    if not cases:
        raise ValueError("cannot split an empty set of cases")
    ids = [case_id for case_id, _ in cases]
    if len(set(ids)) != len(ids):
        raise ValueError("each case must appear exactly once")

    threshold = median(score for _, score in cases)
    if tie_to_a:
        group_a = frozenset(c for c, score in cases if score >= threshold)
    else:
        group_a = frozenset(c for c, score in cases if score > threshold)
    group_b = frozenset(ids) - group_a
    logger.info(
        f"Median split at {threshold:g}: {len(group_a)} case(s) in A, {len(group_b)} in B"
    )
    return MedianSplit(group_a, group_b, threshold)


def _label_of(event: ScoredEvent, aggregation: Aggregation) -> str | None:
    if aggregation is Aggregation.ACTIVITY:
        return event.event_name or None
    return event.section


def missing_label_count(events: Iterable[ScoredEvent], aggregation: Aggregation) -> int:
    """Number of events :func:`project_event_log` drops for lack of a label."""
    return sum(1 for e in events if _label_of(e, aggregation) is None)


def project_event_log(
    events: Iterable[ScoredEvent], aggregation: Aggregation, scope: CaseScope
) -> EventLog:
    """Map scored events to an event log.

    The activity label is the event name (activity level) or the section
    (section levels); the case is the student, or the (course, student) pair
    for the cross-course scope. Rows without a label are dropped.
    """
    rows = []
    dropped = 0
    case_ids: dict[tuple[str, str], CaseId] = {}
    for event in events:
        label = _label_of(event, aggregation)
        if label is None:
            dropped += 1
            continue
        key = (event.course_id, event.user_id)
        case_id = case_ids.get(key)
        if case_id is None:
            case_id = case_ids[key] = build_case_id(event.course_id, event.user_id, scope)
        rows.append(EventRow(case_id, event.timestamp, label, event.row_index))

    if dropped:
        logger.info(f"Dropped {dropped} event(s) without a {aggregation.value} label")
    return EventLog.from_rows(aggregation, rows)


def case_scores(events: Iterable[ScoredEvent], scope: CaseScope) -> dict[CaseId, float]:
    """Score of each case; all events of a case carry the same score."""
    scores: dict[CaseId, float] = {}
    for event in events:
        case_id = build_case_id(event.course_id, event.user_id, scope)
        scores.setdefault(case_id, event.score)
    return scores


@dataclass(frozen=True)
class SplitReport:
    """Summary written next to the two cohort logs.

    Attributes:
        median: Score threshold used
        cases_a: Number of cases in group A
        cases_b: Number of cases in group B
        events_a: Events in group A's log
        events_b: Events in group B's log
        dropped_events: Events dropped for lack of a label
    """

    median: float
    cases_a: int
    cases_b: int
    events_a: int
    events_b: int
    dropped_events: int

    def to_rows(self) -> list[tuple[str, Union[int, float]]]:
        return [
            ("median", self.median),
            ("cases_a", self.cases_a),
            ("cases_b", self.cases_b),
            ("events_a", self.events_a),
            ("events_b", self.events_b),
            ("dropped_events", self.dropped_events),
        ]


def resolve_aggregation(scope: CaseScope, section_level: bool) -> Aggregation:
    """Aggregation level for a scope and a label column choice.

    Raises:
        ValueError: For activity labels across courses, which cannot be aligned
    """
    if scope is CaseScope.CROSS_COURSE:
        if not section_level:
            raise ValueError("cross-course analysis requires section aggregation")
        return Aggregation.CROSS_COURSE_SECTION
    return Aggregation.SECTION if section_level else Aggregation.ACTIVITY


def split_cohorts(
    events: Sequence[ScoredEvent],
    aggregation: Aggregation,
    scope: CaseScope,
    tie_to_a: bool = False,
) -> tuple[EventLog, EventLog, SplitReport]:
    """Build the group A and group B logs of one analysis.

    The per-course scope needs events of a single course, since student IDs
    only identify cases within a course.

    Raises:
        ValueError: If the per-course scope is used on several courses
        EmptyResultError: If there are no events or one group is empty
    """
    if not events:
        raise EmptyResultError("no events to split")
    if scope is CaseScope.PER_COURSE:
        courses = {e.course_id for e in events}
        if len(courses) > 1:
            raise ValueError(
                f"per-course scope needs a single course, got {len(courses)}; "
                "select one course or use the cross-course scope"
            )

    scores = case_scores(events, scope)
    split = median_split(list(scores.items()), tie_to_a=tie_to_a)
    if not split.group_a or not split.group_b:
        raise EmptyResultError(
            f"median split at {split.median:g} left a group empty "
            f"(A: {len(split.group_a)}, B: {len(split.group_b)} cases)"
        )

    log = project_event_log(events, aggregation, scope)
    log_a = log.with_traces(t for t in log if t.case_id in split.group_a)
    log_b = log.with_traces(t for t in log if t.case_id in split.group_b)
    report = SplitReport(
        median=split.median,
        cases_a=log_a.case_count,
        cases_b=log_b.case_count,
        events_a=log_a.event_count,
        events_b=log_b.event_count,
        dropped_events=missing_label_count(events, aggregation),
    )
    return log_a, log_b, report
