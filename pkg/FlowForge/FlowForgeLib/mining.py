"""Directly-follows transition systems.

States are activity labels plus an artificial start and end; a transition
(x, y) is counted each time y directly follows x in a trace. Every state and
transition keeps a vector of occurrence counts indexed by case, zeros
included, which is what the cohort comparison tests on.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np

from FlowForgeLib.model import CaseId, EventLog, Trace

logger = logging.getLogger(__name__)

START = "__START__"
END = "__END__"

Transition = tuple[str, str]
Element = Union[str, Transition]


def element_kind(element: Element) -> str:
    """``"state"`` or ``"transition"``."""
    return "transition" if isinstance(element, tuple) else "state"


def element_name(element: Element) -> str:
    """Display form: the label, or ``"x -> y"`` for a transition."""
    if isinstance(element, tuple):
        return f"{element[0]} -> {element[1]}"
    return element


def _sort_key(element: Element) -> tuple[int, Element]:
    return (1, element) if isinstance(element, tuple) else (0, element)


@dataclass(frozen=True)
class TransitionSystem:
    """States and directly-follows transitions with per-case frequency vectors.

    Attributes:
        case_ids: Cases in vector order
        state_counts: State label -> occurrences per case
        transition_counts: (source, target) -> occurrences per case
    """

    case_ids: tuple[CaseId, ...]
    state_counts: dict[str, np.ndarray]
    transition_counts: dict[Transition, np.ndarray]

    @property
    def case_count(self) -> int:
        return len(self.case_ids)

    @property
    def states(self) -> list[str]:
        return sorted(self.state_counts)

    @property
    def transitions(self) -> list[Transition]:
        return sorted(self.transition_counts)

    def elements(self) -> Iterator[Element]:
        """States, then transitions, each sorted by label."""
        yield from self.states
        yield from self.transitions

    def __contains__(self, element: object) -> bool:
        return element in self.state_counts or element in self.transition_counts

    def _vector(self, element: Element) -> np.ndarray:
        if isinstance(element, tuple):
            return self.transition_counts[element]
        return self.state_counts[element]

    def total(self, element: Element) -> int:
        """Occurrences of ``element`` over all cases."""
        return int(self._vector(element).sum())

    def to_dfg(self) -> tuple[dict[Transition, int], dict[str, int], dict[str, int]]:
        """Plain directly-follows graph: ``(dfg, start_activities, end_activities)``."""
        dfg: dict[Transition, int] = {}
        starts: dict[str, int] = {}
        ends: dict[str, int] = {}
        for (source, target), counts in sorted(self.transition_counts.items()):
            total = int(counts.sum())
            if source == START:
                starts[target] = total
            elif target == END:
                ends[source] = total
            else:
                dfg[(source, target)] = total
        return dfg, starts, ends


def per_case_frequency(ts: TransitionSystem, element: Element) -> np.ndarray:
    """Occurrences of ``element`` in each case, zeros included.

    Raises:
        KeyError: If ``element`` is not part of the system
    """
    if element not in ts:
        raise KeyError(f"unknown element: {element_name(element)}")
    return ts._vector(element).copy()


def trace_elements(labels: Sequence[str]) -> tuple[Counter[str], Counter[Transition]]:
    """State and transition occurrences of one trace, start and end included.

    Raises:
        ValueError: If an activity is labelled like the artificial start or end
    """
    for sentinel in (START, END):
        if sentinel in labels:
            raise ValueError(f"activity label {sentinel!r} is reserved")
    path = [START, *labels, END]
    return Counter(path), Counter(zip(path, path[1:]))


def system_from_traces(traces: Sequence[Trace]) -> TransitionSystem:
    """Build a transition system over ``traces``; case IDs need not be unique."""
    n = len(traces)
    state_counts: dict[str, np.ndarray] = {}
    transition_counts: dict[Transition, np.ndarray] = {}
    for index, trace in enumerate(traces):
        states, transitions = trace_elements(trace.labels)
        for state, count in states.items():
            if state not in state_counts:
                state_counts[state] = np.zeros(n, dtype=np.int64)
            state_counts[state][index] = count
        for transition, count in transitions.items():
            if transition not in transition_counts:
                transition_counts[transition] = np.zeros(n, dtype=np.int64)
            transition_counts[transition][index] = count

    return TransitionSystem(
        case_ids=tuple(t.case_id for t in traces),
        state_counts=state_counts,
        transition_counts=transition_counts,
    )


def build_transition_system(log: EventLog, allow_empty: bool = False) -> TransitionSystem:
    """Build the transition system of ``log``.

    Raises:
        ValueError: If the log has no traces and ``allow_empty`` is False, or if an
            activity uses a reserved start or end label
    """
    if not log.traces and not allow_empty:
        raise ValueError("cannot build a transition system from an empty log")
    ts = system_from_traces(log.traces)
    logger.info(
        f"Built transition system: {len(ts.state_counts)} states, "
        f"{len(ts.transition_counts)} transitions over {ts.case_count} cases"
    )
    return ts


def _lowest(totals: Iterable[tuple[Element, int]], fraction: float) -> set[Element]:
    ranked = sorted(totals, key=lambda item: (item[1], item[0]))
    # Small epsilon so that e.g. 0.29 * 100 counts as 29
    count = math.floor(fraction * len(ranked) + 1e-9)
    return {element for element, _ in ranked[:count]}


def filter_low_frequency(ts: TransitionSystem, fraction: float = 0.10) -> TransitionSystem:
    """Remove the least frequent states and transitions.

    The ``floor(fraction * n)`` lowest-total states (start and end excluded)
    and, independently, the ``floor(fraction * m)`` lowest-total transitions
    are removed, ties going by label; transitions touching a removed state go
    too.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")

    states = [(s, int(v.sum())) for s, v in ts.state_counts.items() if s not in (START, END)]
    removed_states = _lowest(states, fraction)
    transitions = [(t, int(v.sum())) for t, v in ts.transition_counts.items()]
    removed_transitions = _lowest(transitions, fraction)

    state_counts = {s: v for s, v in ts.state_counts.items() if s not in removed_states}
    transition_counts = {
        t: v
        for t, v in ts.transition_counts.items()
        if t not in removed_transitions
        and t[0] not in removed_states
        and t[1] not in removed_states
    }
    logger.info(
        f"Low-frequency filter ({fraction:.0%}): removed {len(removed_states)} states, "
        f"{len(ts.transition_counts) - len(transition_counts)} transitions"
    )
    return TransitionSystem(ts.case_ids, state_counts, transition_counts)


def sorted_elements(elements: Iterable[Element]) -> list[Element]:
    """Sort states before transitions, each by label."""
    return sorted(elements, key=_sort_key)
