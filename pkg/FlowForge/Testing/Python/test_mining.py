"""Tests for transition system construction and the low-frequency filter."""

from __future__ import annotations

from collections import Counter
from typing import Any, Callable

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

# make_log is a stateless builder
FIXTURE_OK = [HealthCheck.function_scoped_fixture]

label_traces = st.lists(
    st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=12),
    min_size=1,
    max_size=10,
)


def _log(make_log: Callable[..., Any], traces: list[list[str]]) -> Any:
    return make_log({f"u{i}": labels for i, labels in enumerate(traces)})


class TestBuildTransitionSystem:
    """Tests for build_transition_system."""

    def test_single_trace(self, make_log: Callable[..., Any]) -> None:
        """One trace gives a chain from start to end, each element seen once."""
        from FlowForgeLib.mining import END, START, build_transition_system

        ts = build_transition_system(make_log({"u1": ["a", "b"]}))

        assert set(ts.states) == {START, "a", "b", END}
        assert ts.transitions == sorted([(START, "a"), ("a", "b"), ("b", END)])
        for element in ts.elements():
            assert ts.total(element) == 1

    def test_zeros_are_kept(self, make_log: Callable[..., Any]) -> None:
        """Cases that never visit an element count zero for it."""
        from FlowForgeLib.mining import build_transition_system, per_case_frequency

        ts = build_transition_system(make_log({"u1": ["a", "a"], "u2": ["b"]}))

        assert per_case_frequency(ts, "a").tolist() == [2, 0]
        assert per_case_frequency(ts, ("a", "a")).tolist() == [1, 0]
        assert per_case_frequency(ts, "b").tolist() == [0, 1]

    def test_empty_log(self, make_log: Callable[..., Any]) -> None:
        """An empty log is refused unless explicitly allowed."""
        from FlowForgeLib.mining import build_transition_system

        empty = make_log({})
        with pytest.raises(ValueError, match="empty log"):
            build_transition_system(empty)
        assert build_transition_system(empty, allow_empty=True).case_count == 0

    def test_unknown_element(self, make_log: Callable[..., Any]) -> None:
        """Asking for an absent element raises KeyError naming it."""
        from FlowForgeLib.mining import build_transition_system, per_case_frequency

        ts = build_transition_system(make_log({"u1": ["a"]}))
        with pytest.raises(KeyError, match="a -> z"):
            per_case_frequency(ts, ("a", "z"))

    @pytest.mark.parametrize("reserved", ["__START__", "__END__"])
    def test_reserved_labels_rejected(self, reserved: str, make_log: Callable[..., Any]) -> None:
        """An activity named like the artificial start or end cannot join the system."""
        from FlowForgeLib.mining import build_transition_system

        log = make_log({"u1": [reserved, "a"], "u2": ["a"]})

        with pytest.raises(ValueError, match="reserved"):
            build_transition_system(log)

    @settings(max_examples=500, deadline=None, suppress_health_check=FIXTURE_OK)
    @given(traces=label_traces)
    def test_matches_brute_force_count(
        self, traces: list[list[str]], make_log: Callable[..., Any]
    ) -> None:
        """Per-case counts equal a direct count over each padded trace."""
        from FlowForgeLib.mining import END, START, build_transition_system, per_case_frequency

        ts = build_transition_system(_log(make_log, traces))

        for index, labels in enumerate(traces):
            path = [START, *labels, END]
            states = Counter(path)
            pairs = Counter(zip(path, path[1:]))
            for state in ts.states:
                assert per_case_frequency(ts, state)[index] == states[state]
            for transition in ts.transitions:
                assert per_case_frequency(ts, transition)[index] == pairs[transition]

    @settings(max_examples=200, deadline=None, suppress_health_check=FIXTURE_OK)
    @given(traces=label_traces)
    def test_flow_conservation(self, traces: list[list[str]], make_log: Callable[..., Any]) -> None:
        """Every case starts and ends once, and each state's visits equal its incoming edges."""
        from FlowForgeLib.mining import END, START, build_transition_system

        ts = build_transition_system(_log(make_log, traces))
        n = len(traces)

        assert ts.state_counts[START].tolist() == [1] * n
        assert ts.state_counts[END].tolist() == [1] * n
        outgoing = sum(v for (src, _), v in ts.transition_counts.items() if src == START)
        assert np.array_equal(outgoing, np.ones(n))
        for state in ts.states:
            if state in (START, END):
                continue
            incoming = sum(v for (_, dst), v in ts.transition_counts.items() if dst == state)
            assert np.array_equal(incoming, ts.state_counts[state])


class TestToDfg:
    """Tests for TransitionSystem.to_dfg."""

    def test_split_into_starts_and_ends(self, make_log: Callable[..., Any]) -> None:
        """Edges from start and into end become start and end activity counts."""
        from FlowForgeLib.mining import build_transition_system

        ts = build_transition_system(make_log({"u1": ["a", "b"], "u2": ["a"]}))
        dfg, starts, ends = ts.to_dfg()

        assert dfg == {("a", "b"): 1}
        assert starts == {"a": 2}
        assert ends == {"a": 1, "b": 1}


class TestFilterLowFrequency:
    """Tests for filter_low_frequency."""

    def test_lowest_states_and_their_edges_removed(self, make_log: Callable[..., Any]) -> None:
        """The least frequent states go together with their transitions."""
        from FlowForgeLib.mining import build_transition_system, filter_low_frequency

        traces = {f"u{i}": ["a", "b"] for i in range(9)}
        traces["u9"] = ["a", "rare"]
        ts = build_transition_system(make_log(traces))

        # 3 labelled states -> floor(0.5 * 3) = 1 removed
        filtered = filter_low_frequency(ts, 0.5)

        assert "rare" not in filtered.states
        assert ("a", "rare") not in filtered
        assert "a" in filtered.states
        assert filtered.case_count == ts.case_count

    def test_zero_fraction_is_identity(self, make_log: Callable[..., Any]) -> None:
        """A zero fraction removes nothing."""
        from FlowForgeLib.mining import build_transition_system, filter_low_frequency

        ts = build_transition_system(make_log({"u1": ["a", "b"], "u2": ["c"]}))
        filtered = filter_low_frequency(ts, 0.0)

        assert filtered.states == ts.states
        assert filtered.transitions == ts.transitions

    @pytest.mark.parametrize("fraction", [-0.1, 1.0])
    def test_invalid_fraction(self, fraction: float, make_log: Callable[..., Any]) -> None:
        """The fraction must lie in [0, 1)."""
        from FlowForgeLib.mining import build_transition_system, filter_low_frequency

        ts = build_transition_system(make_log({"u1": ["a"]}))
        with pytest.raises(ValueError, match="fraction"):
            filter_low_frequency(ts, fraction)

    @settings(max_examples=200, deadline=None, suppress_health_check=FIXTURE_OK)
    @given(traces=label_traces, fraction=st.sampled_from([0.1, 0.25, 0.5, 0.9]))
    def test_never_removes_start_or_end(
        self, traces: list[list[str]], fraction: float, make_log: Callable[..., Any]
    ) -> None:
        """Filtering keeps start and end and never leaves dangling transitions."""
        from FlowForgeLib.mining import END, START, build_transition_system, filter_low_frequency

        ts = build_transition_system(_log(make_log, traces))
        filtered = filter_low_frequency(ts, fraction)

        assert START in filtered.states
        assert END in filtered.states
        assert set(filtered.transitions) <= set(ts.transitions)
        for source, target in filtered.transitions:
            assert source in filtered.state_counts
            assert target in filtered.state_counts


class TestElementHelpers:
    """Tests for element naming and ordering."""

    def test_names_and_kinds(self) -> None:
        """Transitions are named with an arrow; bare labels are states."""
        from FlowForgeLib.mining import element_kind, element_name

        assert element_name(("a", "b")) == "a -> b"
        assert element_kind(("a", "b")) == "transition"
        assert element_kind("a") == "state"

    def test_states_sort_first(self) -> None:
        """States sort before transitions."""
        from FlowForgeLib.mining import sorted_elements

        assert sorted_elements([("a", "b"), "z", "a"]) == ["a", "z", ("a", "b")]
