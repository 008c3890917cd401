"""pytest configuration and fixtures for FlowForge tests."""

from __future__ import annotations

import sys
from collections.abc import Mapping, Sequence
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Callable

import pytest

# Add the module to the path for imports
MODULE_DIR = Path(__file__).parent.parent.parent
sys.path.insert(0, str(MODULE_DIR))

FIXTURES_DIR = Path(__file__).parent / "test_fixtures"
REPO_ROOT = MODULE_DIR.parent

BASE_TIME = datetime(2022, 8, 30, 17, 25, 20, tzinfo=timezone(timedelta(hours=2)))


@pytest.fixture
def fixtures_dir() -> Path:
    """Directory holding the sample exports, rule file and golden XES."""
    return FIXTURES_DIR


@pytest.fixture
def events_csv() -> Path:
    """Event export of two courses; C1 has four graded students and one ungraded."""
    return FIXTURES_DIR / "events.csv"


@pytest.fixture
def scores_csv() -> Path:
    """Score export matching ``events_csv`` plus one unused score."""
    return FIXTURES_DIR / "scores.csv"


@pytest.fixture
def builtin_profiles_dir() -> Path:
    return REPO_ROOT / "profiles" / "builtin"


@pytest.fixture
def make_log() -> Callable[..., Any]:
    """Build an EventLog from ``{case: [label, ...]}``, events one second apart."""

    def build(
        traces: Mapping[str, Sequence[str]], aggregation: Any = None, cross: bool = False
    ) -> Any:
        from FlowForgeLib.model import Aggregation, CaseId, CaseScope, EventLog, EventRow

        scope = CaseScope.CROSS_COURSE if cross else CaseScope.PER_COURSE
        rows = []
        order = 0
        for case_index, (case, labels) in enumerate(traces.items()):
            start = BASE_TIME + timedelta(minutes=case_index)
            for offset, label in enumerate(labels):
                rows.append(
                    EventRow(CaseId(scope, case), start + timedelta(seconds=offset), label, order)
                )
                order += 1
        return EventLog.from_rows(aggregation or Aggregation.SECTION, rows)

    return build


@pytest.fixture
def make_event() -> Callable[..., Any]:
    """Build a ScoredEvent with sensible defaults."""

    def build(
        user_id: str = "u1",
        score: float = 50.0,
        section: str | None = "class 1",
        event_name: str = "Download 1",
        course_id: str = "C1",
        course_name: str = "Procedural Languages",
        seconds: int = 0,
        row_index: int = 0,
    ) -> Any:
        from FlowForgeLib.model import CaseId, CaseScope, RawEvent, ScoredEvent

        raw = RawEvent(
            timestamp=BASE_TIME + timedelta(seconds=seconds),
            course_name=course_name,
            course_id=course_id,
            event_name=event_name,
            section=section,
            user_id=user_id,
            row_index=row_index,
        )
        return ScoredEvent(raw, score, CaseId(CaseScope.PER_COURSE, user_id))

    return build


@pytest.fixture
def four_case_events(make_event: Callable[..., Any]) -> list[Any]:
    """One course, students u1..u4 scoring 60/70/80/90, three events each."""
    events = []
    row = 0
    for index, (user, score) in enumerate((("u1", 60), ("u2", 70), ("u3", 80), ("u4", 90))):
        for step, section in enumerate(("self study 1", "class 1", "class 2")):
            events.append(
                make_event(
                    user_id=user,
                    score=float(score),
                    section=section,
                    event_name=f"view {section}",
                    seconds=index * 100 + step,
                    row_index=row,
                )
            )
            row += 1
    return events


@pytest.fixture
def small_profiles() -> tuple[Any, Any]:
    """Two identical four-section profiles, 30 cases of 40 events each."""
    from FlowForgeLib.synth import BehaviorProfile

    profile = BehaviorProfile(
        sections=("class 1", "self study 1", "class 2", "self study 2"),
        weights=(4.0, 3.0, 2.0, 1.0),
        jump_rate=8.0,
        cases=30,
        events_mean=40.0,
        score_low=10.0,
        score_high=90.0,
    )
    return profile, profile
