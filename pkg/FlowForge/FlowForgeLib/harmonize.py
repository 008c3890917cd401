"""Section title harmonization.

Course authors name their sections freely ("Präsenz 3 - Functions",
"Self-Study b: recursion", ...). For cross-course analysis the titles are
rewritten into a standard schema (``class 1..9``, ``self study 1..9``) by an
ordered table of regular expressions; the first matching rule wins.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from FlowForgeLib.errors import ConfigError
from FlowForgeLib.model import EventLog, ScoredEvent, Trace

logger = logging.getLogger(__name__)

STANDARD_SECTION_RE = re.compile(r"^(class|self study) [1-9]$")

STANDARD_SECTIONS: tuple[str, ...] = (
    *(f"class {n}" for n in range(1, 10)),
    *(f"self study {n}" for n in range(1, 10)),
)

_GROUP_REF_RE = re.compile(r"\$(\d+)")

# Letter-numbered self-study sections, a -> 1 ... i -> 9
_LETTERS = "abcdefghi"
_SELF_STUDY = r"(self-study|self study|eigenstudium)"


@dataclass(frozen=True)
class HarmonizationRule:
    """A whole-title regex rewrite.

    Attributes:
        pattern: Compiled pattern, matched against the whole title
        replacement: Template; ``$N`` refers to capture group N
    """

    pattern: re.Pattern[str]
    replacement: str

    @classmethod
    def compile(cls, pattern: str, replacement: str) -> HarmonizationRule:
        """Compile a case-insensitive rule.

        Raises:
            ConfigError: If the pattern is invalid or the replacement refers
                to a group the pattern does not have
        """
        try:
            compiled = re.compile(pattern, re.IGNORECASE)
        except re.error as e:
            raise ConfigError(f"invalid pattern {pattern!r}: {e}") from e
        for ref in _GROUP_REF_RE.findall(replacement):
            if int(ref) > compiled.groups or int(ref) == 0:
                raise ConfigError(
                    f"replacement {replacement!r} refers to group ${ref}, "
                    f"pattern {pattern!r} has {compiled.groups}"
                )
        return cls(compiled, replacement)

    def apply(self, title: str) -> str | None:
        """Rewritten title, or None when the rule does not match."""
        match = self.pattern.fullmatch(title)
        if match is None:
            return None
        return _GROUP_REF_RE.sub(lambda m: match.group(int(m.group(1))) or "", self.replacement)


@dataclass(frozen=True)
class RuleTable:
    """Ordered harmonization rules; the first match wins."""

    rules: tuple[HarmonizationRule, ...] = ()

    def rewrite(self, title: str) -> str | None:
        """Apply the first matching rule, or return None when none matches."""
        for rule in self.rules:
            result = rule.apply(title)
            if result is not None:
                return result
        return None

    @classmethod
    def from_file(cls, path: Path | str) -> RuleTable:
        """Load a rule file: one ``pattern<TAB>replacement`` per line.

        Blank lines and lines starting with ``#`` are skipped.

        Raises:
            ConfigError: On a line without a tab or an invalid rule
        """
        path = Path(path)
        logger.debug(f"Loading harmonization rules from {path}")
        rules = []
        for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise ConfigError(f"{path}:{number}: expected pattern<TAB>replacement")
            pattern, replacement = line.split("\t", 1)
            try:
                rules.append(HarmonizationRule.compile(pattern, replacement.strip()))
            except ConfigError as e:
                raise ConfigError(f"{path}:{number}: {e}") from e
        logger.info(f"Loaded {len(rules)} harmonization rules from {path}")
        return cls(tuple(rules))

    def __len__(self) -> int:
        return len(self.rules)


def default_rule_table() -> RuleTable:
    """Rules for numbered and lettered class/self-study sections 1 to 9.

    The digit or letter must not be followed by another word character, so
    "class 12" and "self study about" stay unmatched; "class 0" is not a
    standard section either.
    """
    rules = [
        HarmonizationRule.compile(r"(.*)(class) ([1-9])(\W.*|)", "class $3"),
        HarmonizationRule.compile(rf"(.*){_SELF_STUDY} ([1-9])(\W.*|)", "self study $3"),
        HarmonizationRule.compile(r"(.*)(präsenz) ([1-9])(\W.*|)", "class $3"),
    ]
    for number, letter in enumerate(_LETTERS, start=1):
        pattern = rf"(.*){_SELF_STUDY} ({letter})(\W.*|)"
        rules.append(HarmonizationRule.compile(pattern, f"self study {number}"))
    return RuleTable(tuple(rules))


@dataclass
class ReplacementReport:
    """Which distinct original titles were collapsed into each standard title.

    Attributes:
        originals: Standardized title -> distinct original titles
    """

    originals: dict[str, set[str]] = field(default_factory=dict)

    @property
    def counts(self) -> dict[str, int]:
        """Standardized title -> number of distinct originals, in standard order."""
        return {
            title: len(self.originals[title])
            for title in sorted(self.originals, key=standard_section_key)
        }

    def to_rows(self) -> list[tuple[str, int]]:
        return list(self.counts.items())


def standard_section_key(label: str) -> tuple[int, int, str]:
    """Sort key: class 1..9, then self study 1..9, then anything else by name."""
    try:
        return (STANDARD_SECTIONS.index(label), 0, "")
    except ValueError:
        return (len(STANDARD_SECTIONS), 1, label)


def harmonize_sections(
    events: Sequence[ScoredEvent], rules: RuleTable
) -> tuple[list[ScoredEvent], ReplacementReport]:
    """Rewrite each event's section with the first matching rule.

    Events without a section, or whose section matches no rule, are left
    unchanged.
    """
    report = ReplacementReport()
    cache: dict[str, str | None] = {}
    result = []
    for event in events:
        title = event.section
        if title is None:
            result.append(event)
            continue
        if title not in cache:
            cache[title] = rules.rewrite(title)
        target = cache[title]
        if target is None:
            result.append(event)
            continue
        report.originals.setdefault(target, set()).add(title)
        result.append(event if target == title else event.with_section(target))

    logger.info(
        f"Harmonized {len(cache)} distinct section titles into {len(report.originals)} "
        "standard titles"
    )
    return result, report


def filter_standardized(events: Iterable[ScoredEvent]) -> list[ScoredEvent]:
    """Keep only events whose section is ``class N`` or ``self study N`` (N = 1..9)."""
    kept = [e for e in events if e.section is not None and STANDARD_SECTION_RE.match(e.section)]
    courses = {e.course_id for e in kept}
    logger.info(f"Kept {len(kept)} events in standard sections ({len(courses)} courses)")
    return kept


def collapse_repeats(labels: Iterable[str]) -> list[int]:
    """Indices of the labels kept when consecutive repeats are removed."""
    kept = []
    previous: str | None = None
    for index, label in enumerate(labels):
        if index == 0 or label != previous:
            kept.append(index)
        previous = label
    return kept


def remove_self_loops(log: EventLog) -> EventLog:
    """Drop each event whose section equals the previous retained event's section.

    Raises:
        ValueError: For activity-level logs
    """
    if not log.aggregation.is_section_level:
        raise ValueError("self-loop removal is defined for section-level logs only")

    traces = []
    removed = 0
    for trace in log:
        kept = collapse_repeats(trace.labels)
        removed += len(trace) - len(kept)
        traces.append(Trace(trace.case_id, tuple(trace.events[i] for i in kept)))
    logger.info(f"Removed {removed} self-loop event(s)")
    return log.with_traces(traces)


def drop_section_repeats(events: Sequence[ScoredEvent]) -> list[ScoredEvent]:
    """Event-level self-loop removal, per student and course, in time order.

    Events without a section are never removed and do not break a run.
    Output keeps the input order.
    """
    by_student: dict[tuple[str, str], list[int]] = {}
    for index, event in enumerate(events):
        if event.section is not None:
            by_student.setdefault((event.course_id, event.user_id), []).append(index)

    dropped: set[int] = set()
    for indices in by_student.values():
        indices.sort(key=lambda i: (events[i].timestamp, events[i].row_index))
        kept = set(collapse_repeats(events[i].section or "" for i in indices))
        dropped.update(i for position, i in enumerate(indices) if position not in kept)

    logger.info(f"Removed {len(dropped)} self-loop event(s)")
    return [e for i, e in enumerate(events) if i not in dropped]
