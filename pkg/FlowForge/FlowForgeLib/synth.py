"""Seeded synthetic clickstreams for two cohorts.

Each case is a first-order Markov walk over course sections: after every
event the student stays in the current section or, with a fixed jump
probability, draws the next section from the profile's section weights
(possibly the same one again). The stay/jump mixture keeps the weights as the
long-run share of events per section while the jump probability sets the
expected number of section changes per case.

Randomness comes from numpy's PCG64 generator. Every case gets its own
generator seeded with ``[seed, cohort, case]`` (cohort 0 is A, 1 is B), so
output does not depend on the number of worker threads and is stable for a
given seed.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import NamedTuple

import numpy as np

from FlowForgeLib.config import load_config, parse_key_values, thread_count
from FlowForgeLib.errors import ConfigError
from FlowForgeLib.model import (
    Aggregation,
    CaseId,
    CaseScope,
    EventLog,
    GroupLabel,
    RawEvent,
    ScoreRecord,
    Trace,
    TraceEvent,
)

logger = logging.getLogger(__name__)

COURSE_ID = "C001"
COURSE_NAME = "Synthetic Course"
EPOCH = datetime(2022, 9, 1, 8, 0, tzinfo=timezone(timedelta(hours=2)))

# Case start times spread over two weeks; events at least one second apart
_START_SPREAD_S = 14 * 24 * 3600
_MIN_GAP_MS = 1000
_MAX_EXTRA_GAP_MS = 600_000

_PROFILE_KEYS = {
    "sections", "weights", "jump_rate", "start", "cases", "events_mean",
    "score_low", "score_high", "bias",
}


def _normalized(values: tuple[float, ...], name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.size == 0 or np.any(array < 0) or not np.all(np.isfinite(array)):
        raise ValueError(f"{name} must be non-negative finite numbers")
    total = array.sum()
    if total <= 0:
        raise ValueError(f"{name} must not all be zero")
    return array / total


@dataclass(frozen=True)
class BehaviorProfile:
    """Parameters of one synthetic cohort.

    Attributes:
        sections: Section labels in course order
        weights: Positive relative event rate per section
        jump_rate: Expected number of section changes per case
        start: Start-section probabilities; the normalized weights when empty
        cases: Number of cases to generate
        events_mean: Mean events per case (1 + Poisson(events_mean - 1))
        score_low: Lowest final score of the cohort
        score_high: Highest final score of the cohort
        bias: (from, to) -> multiplier on the jump probability of that transition
    """

    sections: tuple[str, ...]
    weights: tuple[float, ...]
    jump_rate: float
    start: tuple[float, ...] = ()
    cases: int = 100
    events_mean: float = 100.0
    score_low: float = 0.0
    score_high: float = 100.0
    bias: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.sections:
            raise ValueError("a profile needs at least one section")
        if len(set(self.sections)) != len(self.sections):
            raise ValueError("section labels must be unique")
        if len(self.weights) != len(self.sections):
            raise ValueError(
                f"{len(self.weights)} weights given for {len(self.sections)} sections"
            )
        if any(w <= 0 for w in self.weights):
            raise ValueError("section weights must be positive")
        if self.start:
            if len(self.start) != len(self.sections):
                raise ValueError(
                    f"{len(self.start)} start probabilities given for "
                    f"{len(self.sections)} sections"
                )
            if abs(sum(self.start) - 1.0) > 1e-9 or any(p < 0 for p in self.start):
                raise ValueError("start probabilities must be non-negative and sum to 1")
        if self.jump_rate < 0:
            raise ValueError("jump_rate must not be negative")
        if self.cases < 1:
            raise ValueError("cases must be at least 1")
        if self.events_mean < 1:
            raise ValueError("events_mean must be at least 1")
        if not 0 <= self.score_low <= self.score_high <= 100:
            raise ValueError("scores must satisfy 0 <= score_low <= score_high <= 100")
        for (source, target), factor in self.bias.items():
            if source not in self.sections or target not in self.sections:
                raise ValueError(f"bias refers to unknown section: {source} > {target}")
            if factor <= 0:
                raise ValueError(f"bias factor must be positive: {source} > {target}")

    @property
    def section_probabilities(self) -> np.ndarray:
        return _normalized(self.weights, "weights")

    @property
    def start_probabilities(self) -> np.ndarray:
        if not self.start:
            return self.section_probabilities
        return _normalized(self.start, "start")

    @property
    def jump_probability(self) -> float:
        """Per-step probability of drawing a new section.

        Chosen so that the expected number of actual changes per case equals
        ``jump_rate``; clipped to 1.
        """
        w = self.section_probabilities
        change_given_jump = 1.0 - float(np.sum(w**2))
        steps = self.events_mean - 1.0
        if self.jump_rate == 0 or steps == 0 or change_given_jump == 0:
            return 0.0
        return min(1.0, self.jump_rate / (steps * change_given_jump))

    def jump_matrix(self) -> np.ndarray:
        """Row-stochastic next-section probabilities given a jump."""
        w = self.section_probabilities
        matrix = np.tile(w, (len(self.sections), 1))
        index = {s: i for i, s in enumerate(self.sections)}
        for (source, target), factor in self.bias.items():
            matrix[index[source], index[target]] *= factor
        return matrix / matrix.sum(axis=1, keepdims=True)

    @classmethod
    def from_config(cls, values: Mapping[str, str], source: str = "<profile>") -> BehaviorProfile:
        """Build a profile from ``key = value`` settings.

        Raises:
            ConfigError: On unknown keys, missing keys or invalid values
        """
        unknown = set(values) - _PROFILE_KEYS
        if unknown:
            raise ConfigError(f"{source}: unknown profile key(s): {', '.join(sorted(unknown))}")
        for key in ("sections", "weights", "jump_rate"):
            if key not in values:
                raise ConfigError(f"{source}: missing profile key {key!r}")
        try:
            sections = tuple(s.strip() for s in values["sections"].split(",") if s.strip())
            optional: dict[str, object] = {}
            if values.get("start"):
                optional["start"] = _floats(values["start"])
            for key in ("events_mean", "score_low", "score_high"):
                if key in values:
                    optional[key] = float(values[key])
            if "cases" in values:
                optional["cases"] = int(values["cases"])
            if values.get("bias"):
                optional["bias"] = _parse_bias(values["bias"])
            return cls(
                sections=sections,
                weights=_floats(values["weights"]),
                jump_rate=float(values["jump_rate"]),
                **optional,  # type: ignore[arg-type]
            )
        except ValueError as e:
            raise ConfigError(f"{source}: {e}") from e

    @classmethod
    def from_text(cls, text: str, source: str = "<profile>") -> BehaviorProfile:
        return cls.from_config(parse_key_values(text, source), source)

    @classmethod
    def from_file(cls, path: Path | str) -> BehaviorProfile:
        """Load a profile file."""
        profile = cls.from_config(load_config(path), str(path))
        logger.debug(f"Loaded profile {path}: {len(profile.sections)} sections")
        return profile


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_bias(text: str) -> dict[tuple[str, str], float]:
    """``self study 1 > class 2 : 3.0; class 2 > class 3 : 0.5``."""
    bias: dict[tuple[str, str], float] = {}
    for item in text.split(";"):
        if not item.strip():
            continue
        pair, sep, factor = item.partition(":")
        source, arrow, target = pair.partition(">")
        if not sep or not arrow:
            raise ValueError(f"bias entry {item.strip()!r} is not 'from > to : factor'")
        bias[(source.strip(), target.strip())] = float(factor)
    return bias


def default_profiles() -> tuple[BehaviorProfile, BehaviorProfile]:
    """Built-in higher- (A) and lower-performing (B) cohort profiles.

    Both walk the 18 standard sections in course order with engagement
    declining over the course. Cohort A changes section about 23.7% more
    often and mostly starts in ``self study 1``.
    """
    sections = tuple(s for n in range(1, 10) for s in (f"class {n}", f"self study {n}"))
    weights = tuple(float(w) for w in range(len(sections), 0, -1))
    start_a = (0.36, 0.64) + (0.0,) * (len(sections) - 2)
    start_b = (0.679, 0.321) + (0.0,) * (len(sections) - 2)
    higher = BehaviorProfile(
        sections=sections, weights=weights, jump_rate=24.74, start=start_a,
        cases=100, events_mean=100.0, score_low=70.0, score_high=100.0,
    )
    lower = BehaviorProfile(
        sections=sections, weights=weights, jump_rate=20.0, start=start_b,
        cases=100, events_mean=100.0, score_low=20.0, score_high=69.0,
    )
    return higher, lower


class SyntheticCase(NamedTuple):
    """One generated case."""

    user_id: str
    score: float
    events: tuple[TraceEvent, ...]


def _walk(profile: BehaviorProfile, rng: np.random.Generator, length: int) -> np.ndarray:
    k = len(profile.sections)
    first = rng.choice(k, p=profile.start_probabilities)
    jumps = rng.random(length - 1) < profile.jump_probability
    if not profile.bias:
        draws = rng.choice(k, size=length - 1, p=profile.section_probabilities)
        values = np.concatenate(([first], draws))
        kept = np.concatenate(([True], jumps))
        # Forward-fill the section of the last jump
        source = np.where(kept, np.arange(length), 0)
        np.maximum.accumulate(source, out=source)
        return values[source]

    matrix = profile.jump_matrix()
    walk = np.empty(length, dtype=np.int64)
    walk[0] = first
    for i in range(1, length):
        walk[i] = rng.choice(k, p=matrix[walk[i - 1]]) if jumps[i - 1] else walk[i - 1]
    return walk


def generate_case(
    profile: BehaviorProfile, seed: int, cohort: int, case: int, user_id: str
) -> SyntheticCase:
    """Generate one case from its own ``[seed, cohort, case]`` generator."""
    rng = np.random.default_rng([seed, cohort, case])
    length = 1 + int(rng.poisson(profile.events_mean - 1.0))
    walk = _walk(profile, rng, length)
    start_s = int(rng.integers(0, _START_SPREAD_S))
    gaps = _MIN_GAP_MS + rng.integers(0, _MAX_EXTRA_GAP_MS, size=length)
    offsets = np.cumsum(gaps) - gaps[0]
    begin = EPOCH + timedelta(seconds=start_s)
    events = tuple(
        TraceEvent(begin + timedelta(milliseconds=int(offset)), profile.sections[section])
        for offset, section in zip(offsets, walk)
    )
    score = round(float(rng.uniform(profile.score_low, profile.score_high)), 1)
    return SyntheticCase(user_id, score, events)


def generate_cases(
    profile_a: BehaviorProfile, profile_b: BehaviorProfile, seed: int
) -> dict[GroupLabel, list[SyntheticCase]]:
    """Generate both cohorts; user IDs run ``u00001...`` through A, then B."""
    jobs = []
    for cohort, (label, profile) in enumerate(
        ((GroupLabel.A, profile_a), (GroupLabel.B, profile_b))
    ):
        offset = 0 if label is GroupLabel.A else profile_a.cases
        for case in range(profile.cases):
            jobs.append((label, profile, cohort, case, f"u{offset + case + 1:05d}"))

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(
            pool.map(lambda job: generate_case(job[1], seed, job[2], job[3], job[4]), jobs)
        )

    cases: dict[GroupLabel, list[SyntheticCase]] = {GroupLabel.A: [], GroupLabel.B: []}
    for job, result in zip(jobs, results):
        cases[job[0]].append(result)
    return cases


def _log(cases: list[SyntheticCase]) -> EventLog:
    traces = sorted(
        (Trace(CaseId(CaseScope.PER_COURSE, c.user_id), c.events) for c in cases),
        key=lambda t: (t.events[0].timestamp, t.case_id.value),
    )
    return EventLog(Aggregation.SECTION, tuple(traces))


def generate_cohort_pair(
    profile_a: BehaviorProfile, profile_b: BehaviorProfile, seed: int
) -> tuple[EventLog, EventLog]:
    """Section-level logs of two synthetic cohorts; deterministic for a fixed seed."""
    cases = generate_cases(profile_a, profile_b, seed)
    log_a, log_b = _log(cases[GroupLabel.A]), _log(cases[GroupLabel.B])
    logger.info(
        f"Generated {log_a.case_count} + {log_b.case_count} cases "
        f"({log_a.event_count + log_b.event_count} events), seed {seed}"
    )
    return log_a, log_b


def generate_clickstream(
    profile_a: BehaviorProfile,
    profile_b: BehaviorProfile,
    seed: int,
    course_id: str = COURSE_ID,
    course_name: str = COURSE_NAME,
) -> tuple[list[RawEvent], list[ScoreRecord]]:
    """Export-style events and scores of one synthetic course.

    Each event is named after its section (``"view <section>"``).
    """
    cases = generate_cases(profile_a, profile_b, seed)
    events: list[RawEvent] = []
    scores: list[ScoreRecord] = []
    for case in (*cases[GroupLabel.A], *cases[GroupLabel.B]):
        scores.append(ScoreRecord(course_id, case.user_id, case.score))
        for event in case.events:
            events.append(
                RawEvent(
                    timestamp=event.timestamp,
                    course_name=course_name,
                    course_id=course_id,
                    event_name=f"view {event.activity}",
                    section=event.activity,
                    user_id=case.user_id,
                )
            )
    events.sort(key=lambda e: (e.timestamp, e.user_id))
    events = [replace(e, row_index=i) for i, e in enumerate(events)]
    logger.info(f"Generated {len(events)} events and {len(scores)} scores, seed {seed}")
    return events, scores
