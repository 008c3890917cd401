"""Navigation statistics of section-level cohort logs.

How often students change section, where they interact, where they start
and which sections they reach. All tables are plain CSV; plotting is left to
the consumer.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import pandas as pd

from FlowForgeLib.errors import EmptyResultError
from FlowForgeLib.files import Sink, source_name, write_text
from FlowForgeLib.grouping import median
from FlowForgeLib.harmonize import STANDARD_SECTIONS, standard_section_key
from FlowForgeLib.model import EventLog, GroupLabel, Trace

logger = logging.getLogger(__name__)

HEATMAP_COLUMNS = ("group", "section", "count", "share")
SUMMARY_COLUMNS = ("metric", "group_a", "group_b", "ratio")
DISTRIBUTION_COLUMNS = ("group", "section", "fraction")
PRECEDENCE_COLUMNS = ("first", "second", "share_a", "share_b")


def _require_section_level(log: EventLog) -> None:
    if not log.aggregation.is_section_level:
        raise ValueError("navigation statistics need a section-level log")


def _require_cases(log: EventLog, what: str) -> None:
    if not log.traces:
        raise EmptyResultError(f"{what}: the log has no cases")


def safe_ratio(a: float, b: float) -> float:
    """``a / b``; 1.0 when both are zero, inf when only ``b`` is."""
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return a / b


def section_change_count(trace: Trace | Sequence[str]) -> int:
    """Number of adjacent event pairs whose sections differ."""
    labels = trace.labels if isinstance(trace, Trace) else list(trace)
    return sum(1 for earlier, later in zip(labels, labels[1:]) if earlier != later)


@dataclass(frozen=True)
class SectionChangeSummary:
    """Median section changes per case in each group."""

    median_a: float
    median_b: float

    @property
    def ratio(self) -> float:
        return safe_ratio(self.median_a, self.median_b)


def group_section_change_summary(log_a: EventLog, log_b: EventLog) -> SectionChangeSummary:
    """Median of the per-case section change counts of each group.

    Raises:
        ValueError: For activity-level logs
        EmptyResultError: If a group has no cases
    """
    for label, log in (("group A", log_a), ("group B", log_b)):
        _require_section_level(log)
        _require_cases(log, label)
    summary = SectionChangeSummary(
        median_a=median(section_change_count(t) for t in log_a),
        median_b=median(section_change_count(t) for t in log_b),
    )
    logger.info(
        f"Median section changes: A={summary.median_a:g}, B={summary.median_b:g}, "
        f"ratio={summary.ratio:.3f}"
    )
    return summary


@dataclass(frozen=True)
class Heatmap:
    """Event counts per group and section.

    Attributes:
        sections: Column order, standard sections first
        counts: Group -> section -> event count
    """

    sections: tuple[str, ...]
    counts: dict[GroupLabel, dict[str, int]]

    def share(self, group: GroupLabel, section: str) -> float:
        total = sum(self.counts[group].values())
        return self.counts[group].get(section, 0) / total if total else 0.0

    def to_frame(self) -> pd.DataFrame:
        rows = [
            (group.value, section, self.counts[group].get(section, 0), self.share(group, section))
            for group in GroupLabel
            for section in self.sections
        ]
        return pd.DataFrame(rows, columns=list(HEATMAP_COLUMNS))


def _section_counts(log: EventLog) -> Counter[str]:
    return Counter(label for trace in log for label in trace.labels)


def interaction_heatmap(log_a: EventLog, log_b: EventLog) -> Heatmap:
    """Count events per section in both groups.

    Columns are the 18 standard sections in schema order, followed by any
    other section seen, by name.
    """
    counts = {GroupLabel.A: _section_counts(log_a), GroupLabel.B: _section_counts(log_b)}
    seen = set(counts[GroupLabel.A]) | set(counts[GroupLabel.B])
    sections = sorted(seen | set(STANDARD_SECTIONS), key=standard_section_key)
    return Heatmap(tuple(sections), {group: dict(c) for group, c in counts.items()})


def first_section_distribution(log: EventLog) -> dict[str, float]:
    """Fraction of cases whose first event lies in each section.

    Raises:
        EmptyResultError: If the log has no cases
    """
    _require_cases(log, "first-section distribution")
    firsts = Counter(trace.events[0].activity for trace in log)
    return {
        section: firsts[section] / log.case_count
        for section in sorted(firsts, key=standard_section_key)
    }


def section_reach(log: EventLog, section: str) -> float:
    """Fraction of cases that visit ``section`` at least once; 0.0 for an unseen section."""
    _require_cases(log, "section reach")
    visiting = sum(1 for trace in log if section in trace.labels)
    return visiting / log.case_count


def section_precedence_share(log: EventLog, first: str, second: str) -> float:
    """Among cases visiting ``second``, the fraction that visited ``first`` before it.

    Returns NaN when no case visits ``second``.
    """
    visiting = 0
    preceded = 0
    for trace in log:
        labels = trace.labels
        if second not in labels:
            continue
        visiting += 1
        if first in labels[: labels.index(second)]:
            preceded += 1
    return preceded / visiting if visiting else math.nan


def precedence_pairs() -> list[tuple[str, str]]:
    """(self study k, class k+1) for k = 1..8."""
    return [(f"self study {k}", f"class {k + 1}") for k in range(1, 9)]


def _to_csv(frame: pd.DataFrame, sink: Sink) -> None:
    write_text(sink, frame.to_csv(index=False, lineterminator="\n", na_rep="nan"))
    logger.info(f"Wrote {len(frame)} rows to {source_name(sink)}")


def write_heatmap_csv(heatmap: Heatmap, sink: Sink) -> None:
    _to_csv(heatmap.to_frame(), sink)


def write_summary_csv(rows: Iterable[tuple[str, float, float, float]], sink: Sink) -> None:
    """Rows of ``metric,group_a,group_b,ratio``."""
    _to_csv(pd.DataFrame(list(rows), columns=list(SUMMARY_COLUMNS)), sink)


def write_distribution_csv(
    distributions: dict[GroupLabel, dict[str, float]], sink: Sink
) -> None:
    """Rows of ``group,section,fraction``."""
    rows = [
        (group.value, section, fraction)
        for group, distribution in distributions.items()
        for section, fraction in distribution.items()
    ]
    _to_csv(pd.DataFrame(rows, columns=list(DISTRIBUTION_COLUMNS)), sink)


def write_precedence_csv(rows: Iterable[tuple[str, str, float, float]], sink: Sink) -> None:
    _to_csv(pd.DataFrame(list(rows), columns=list(PRECEDENCE_COLUMNS)), sink)


def write_rows_csv(rows: Iterable[Sequence[object]], columns: Sequence[str], sink: Sink) -> None:
    """Write a small report table, e.g. ``metric,value`` pairs."""
    _to_csv(pd.DataFrame(list(rows), columns=list(columns)), sink)
