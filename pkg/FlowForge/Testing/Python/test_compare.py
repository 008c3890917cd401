"""Tests for the Welch test, cohort comparison and DOT export."""

from __future__ import annotations

import io
import math
from dataclasses import replace
from typing import Any, Callable

import numpy as np
import pytest


def _graded_logs(make_log: Callable[..., Any]) -> tuple[Any, Any]:
    """Group A repeats section "a" clearly more often than group B."""
    log_a = make_log({f"a{i}": ["a"] * n + ["b"] for i, n in enumerate((3, 4, 5, 3, 4))})
    log_b = make_log({f"b{i}": ["a"] * n + ["b"] for i, n in enumerate((1, 2, 1, 2, 1))})
    return log_a, log_b


class TestWelchTTest:
    """Tests for welch_t_test."""

    def test_worked_example(self) -> None:
        """Two shifted samples of five give t = -1 on 8 degrees of freedom."""
        from FlowForgeLib.compare import welch_t_test

        result = welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])

        assert result.t == pytest.approx(-1.0)
        assert result.df == pytest.approx(8.0)
        assert result.p == pytest.approx(0.3466, abs=1e-4)
        assert not result.degenerate

    def test_matches_scipy(self) -> None:
        """Statistic, degrees of freedom and p-value agree with scipy on random samples."""
        from scipy import stats

        from FlowForgeLib.compare import welch_t_test

        rng = np.random.default_rng(20221)
        for _ in range(50):
            x = rng.normal(rng.uniform(0, 3), rng.uniform(0.5, 3), size=rng.integers(2, 40))
            y = rng.normal(rng.uniform(0, 3), rng.uniform(0.5, 3), size=rng.integers(2, 40))
            expected = stats.ttest_ind(x, y, equal_var=False)
            result = welch_t_test(x, y)

            assert result.t == pytest.approx(expected.statistic, rel=1e-9)
            assert result.df == pytest.approx(expected.df, rel=1e-9)
            assert result.p == pytest.approx(expected.pvalue, rel=1e-9, abs=1e-15)

    def test_zero_variance_equal_means(self) -> None:
        """Constant equal samples give t = 0 and p = 1."""
        from FlowForgeLib.compare import welch_t_test

        result = welch_t_test([1, 1, 1], [1, 1])

        assert (result.t, result.p, result.degenerate) == (0.0, 1.0, True)
        assert math.isnan(result.df)

    def test_zero_variance_different_means(self) -> None:
        """Constant different samples give an infinite statistic and p = 0."""
        from FlowForgeLib.compare import welch_t_test

        result = welch_t_test([2, 2], [1, 1, 1])

        assert result.t == math.inf
        assert result.p == 0.0
        assert result.degenerate

    def test_too_few_values(self) -> None:
        """Each sample needs at least two values."""
        from FlowForgeLib.compare import welch_t_test

        with pytest.raises(ValueError, match="at least 2"):
            welch_t_test([1.0], [1.0, 2.0])


class TestComparisonConfig:
    """Tests for ComparisonConfig validation."""

    @pytest.mark.parametrize(
        "kwargs", [{"alpha": 0.0}, {"alpha": 1.5}, {"min_group_cases": 1}, {"filter_fraction": 1.0}]
    )
    def test_invalid(self, kwargs: dict[str, Any]) -> None:
        """Out-of-range settings are rejected at construction."""
        from FlowForgeLib.compare import ComparisonConfig

        with pytest.raises(ValueError):
            ComparisonConfig(**kwargs)


class TestCompareGroups:
    """Tests for compare_groups."""

    def test_identical_logs_have_no_significant_element(
        self, make_log: Callable[..., Any]
    ) -> None:
        """A log compared with itself has no significant element."""
        from FlowForgeLib.compare import Direction, compare_groups

        log = make_log({"u1": ["a", "b"], "u2": ["a", "a", "c"], "u3": ["b"]})
        graph = compare_groups(log, log)

        assert len(graph) > 0
        assert graph.significant() == []
        assert all(c.direction is Direction.NONE for c in graph)

    def test_difference_detected(self, make_log: Callable[..., Any]) -> None:
        """A state repeated more often in group A is flagged as more in A."""
        from FlowForgeLib.compare import Direction, compare_groups

        log_a, log_b = _graded_logs(make_log)
        graph = compare_groups(log_a, log_b)

        assert graph["a"].mean_a == pytest.approx(3.8)
        assert graph["a"].mean_b == pytest.approx(1.4)
        assert graph["a"].direction is Direction.MORE_IN_A
        assert graph[("a", "a")].significant
        # Every case ends with a -> b
        assert graph[("a", "b")].direction is Direction.NONE

    def test_swapping_groups_mirrors_result(self, make_log: Callable[..., Any]) -> None:
        """Swapping the groups keeps p-values and flips directions."""
        from FlowForgeLib.compare import Direction, compare_groups

        log_a, log_b = _graded_logs(make_log)
        forward = compare_groups(log_a, log_b)
        backward = compare_groups(log_b, log_a)

        mirrored = {
            Direction.MORE_IN_A: Direction.MORE_IN_B,
            Direction.MORE_IN_B: Direction.MORE_IN_A,
            Direction.NONE: Direction.NONE,
        }
        for comparison in forward:
            other = backward[comparison.element]
            assert other.p == pytest.approx(comparison.p)
            assert other.direction is mirrored[comparison.direction]

    @pytest.mark.parametrize("k", [2, 3])
    def test_duplicating_cases_keeps_means(self, k: int, make_log: Callable[..., Any]) -> None:
        """Repeating every case k times leaves the per-group means unchanged."""
        from FlowForgeLib.compare import compare_groups

        base_a = {"a0": ["a", "b"], "a1": ["a", "a"]}
        base_b = {"b0": ["b"], "b1": ["a", "b", "b"]}

        def repeated(traces: dict[str, list[str]]) -> dict[str, list[str]]:
            return {f"{case}_{i}": labels for i in range(k) for case, labels in traces.items()}

        once = compare_groups(make_log(base_a), make_log(base_b))
        many = compare_groups(make_log(repeated(base_a)), make_log(repeated(base_b)))

        for comparison in once:
            assert many[comparison.element].mean_a == pytest.approx(comparison.mean_a)
            assert many[comparison.element].mean_b == pytest.approx(comparison.mean_b)

    def test_bonferroni_divides_alpha(self, make_log: Callable[..., Any]) -> None:
        """The Bonferroni correction divides alpha by the number of elements."""
        from FlowForgeLib.compare import ComparisonConfig, compare_groups

        log_a, log_b = _graded_logs(make_log)
        graph = compare_groups(log_a, log_b, ComparisonConfig(bonferroni=True))

        assert graph.alpha == pytest.approx(0.05 / len(graph))

    def test_rare_element_never_significant(self, make_log: Callable[..., Any]) -> None:
        """An element seen in a single case is not significant whatever the test says."""
        from FlowForgeLib.compare import ComparisonConfig, WelchResult, compare_groups

        log_a = make_log({"a0": ["a", "x"], "a1": ["a"]})
        log_b = make_log({"b0": ["a"], "b1": ["a"]})

        def always_significant(x: np.ndarray, y: np.ndarray) -> WelchResult:
            return WelchResult(5.0, 10.0, 0.0)

        graph = compare_groups(log_a, log_b, ComparisonConfig(test=always_significant))

        assert graph["x"].support == 1
        assert not graph["x"].significant
        # Equal means are never significant either
        assert not graph["a"].significant

    def test_filter_shrinks_system(self, make_log: Callable[..., Any]) -> None:
        """The low-frequency filter removes elements before testing."""
        from FlowForgeLib.compare import ComparisonConfig, compare_groups

        log_a, log_b = _graded_logs(make_log)
        full = compare_groups(log_a, log_b)
        filtered = compare_groups(log_a, log_b, ComparisonConfig(filter_fraction=0.5))

        assert len(filtered) < len(full)

    def test_mismatched_aggregation(self, make_log: Callable[..., Any]) -> None:
        """Logs of different aggregation levels cannot be compared."""
        from FlowForgeLib.compare import compare_groups
        from FlowForgeLib.model import Aggregation

        log_a = make_log({"u1": ["a"], "u2": ["a"]}, aggregation=Aggregation.ACTIVITY)
        log_b = make_log({"u3": ["a"], "u4": ["a"]})
        with pytest.raises(ValueError, match="cannot compare"):
            compare_groups(log_a, log_b)

    def test_too_few_cases(self, make_log: Callable[..., Any]) -> None:
        """A group below the minimum case count raises EmptyResultError."""
        from FlowForgeLib.compare import compare_groups
        from FlowForgeLib.errors import EmptyResultError

        with pytest.raises(EmptyResultError, match="group A has 1 case"):
            compare_groups(make_log({"u1": ["a"]}), make_log({"u2": ["a"], "u3": ["b"]}))


class TestExport:
    """Tests for DOT and CSV output."""

    def test_identical_logs_render_gray(self, make_log: Callable[..., Any]) -> None:
        """Without significant elements the graph is drawn in gray only."""
        from FlowForgeLib.compare import compare_groups, to_digraph

        log = make_log({"u1": ["a", "b"], "u2": ["a", "c"]})
        source = to_digraph(compare_groups(log, log)).source

        assert "blue" not in source
        assert "red" not in source
        assert "gray" in source

    def test_significant_state_is_blue(self, make_log: Callable[..., Any]) -> None:
        """A state more frequent in group A is filled blue with a thick outline."""
        from FlowForgeLib.compare import compare_groups, to_digraph

        log_a, log_b = _graded_logs(make_log)
        source = to_digraph(compare_groups(log_a, log_b)).source

        assert "fillcolor=blue" in source
        assert "penwidth=2" in source
        assert "shape=circle" in source

    def test_dot_is_deterministic(self, make_log: Callable[..., Any]) -> None:
        """The same comparison always renders the same DOT text."""
        from FlowForgeLib.compare import compare_groups, export_dot

        first, second = io.StringIO(), io.StringIO()
        export_dot(compare_groups(*_graded_logs(make_log)), first)
        export_dot(compare_groups(*_graded_logs(make_log)), second)

        assert first.getvalue() == second.getvalue()

    def test_csv(self, make_log: Callable[..., Any]) -> None:
        """The CSV has one row per element after its header, states first."""
        from FlowForgeLib.compare import COMPARISON_COLUMNS, compare_groups, write_comparison_csv

        graph = compare_groups(*_graded_logs(make_log))
        buffer = io.StringIO()
        write_comparison_csv(graph, buffer)
        lines = buffer.getvalue().splitlines()

        assert lines[0] == ",".join(COMPARISON_COLUMNS)
        assert len(lines) == len(graph) + 1
        assert lines[1].startswith("__END__,state,")


@pytest.mark.slow
class TestSyntheticCohorts:
    """End-to-end checks on generated cohorts."""

    def test_planted_transition_bias_detected(self) -> None:
        """Tripling one jump weight in group A is flagged in at least 95 of 100 runs."""
        from FlowForgeLib.compare import Direction, compare_groups
        from FlowForgeLib.synth import BehaviorProfile, generate_cohort_pair

        plain = BehaviorProfile(
            sections=("class 1", "self study 1", "class 2", "self study 2"),
            weights=(1.0, 1.0, 1.0, 1.0),
            jump_rate=30.0,
            cases=50,
            events_mean=60.0,
        )
        biased = replace(plain, bias={("class 1", "class 2"): 3.0})

        detected = 0
        for seed in range(100):
            graph = compare_groups(*generate_cohort_pair(biased, plain, seed=seed))
            if graph[("class 1", "class 2")].direction is Direction.MORE_IN_A:
                detected += 1

        assert detected >= 95

    def test_identical_profiles_near_nominal_rate(self, small_profiles: tuple[Any, Any]) -> None:
        """Identical cohorts light up between 2% and 10% of elements at alpha 0.05."""
        from FlowForgeLib.compare import compare_groups
        from FlowForgeLib.synth import generate_cohort_pair

        tested = 0
        significant = 0
        for seed in range(200):
            graph = compare_groups(*generate_cohort_pair(*small_profiles, seed=seed))
            tested += len(graph)
            significant += len(graph.significant())

        assert 0.02 <= significant / tested <= 0.10
