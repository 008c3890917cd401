"""Two-cohort comparison of transition systems.

Both logs are mined into one union transition system. For every state and
transition the per-case occurrence counts of group A are tested against
those of group B, and the result is rendered as a colored DOT graph: blue
elements occur more often in A, red ones more often in B, gray ones do not
differ significantly.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

import graphviz
import numpy as np
import pandas as pd
from scipy import stats

from FlowForgeLib.config import thread_count
from FlowForgeLib.errors import EmptyResultError
from FlowForgeLib.files import Sink, source_name, write_text
from FlowForgeLib.mining import (
    END,
    START,
    Element,
    TransitionSystem,
    element_kind,
    element_name,
    filter_low_frequency,
    sorted_elements,
    system_from_traces,
)
from FlowForgeLib.model import EventLog

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05
DEFAULT_MIN_GROUP_CASES = 2
DEFAULT_FILTER_FRACTION = 0.10

COMPARISON_COLUMNS = (
    "element", "kind", "mean_a", "mean_b", "t", "df", "p", "significant", "direction",
)


class WelchResult(NamedTuple):
    """Outcome of a two-sample test.

    ``degenerate`` marks the zero-variance case where the statistic is not
    defined and a convention was applied instead.
    """

    t: float
    df: float
    p: float
    degenerate: bool = False


SampleTest = Callable[[np.ndarray, np.ndarray], WelchResult]


def welch_t_test(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> WelchResult:
    """Welch's unequal-variance two-sided t-test.

    Degrees of freedom follow Welch-Satterthwaite; p comes from the Student-t
    survival function. When both samples have zero variance the result is
    ``t = 0, p = 1`` for equal means, otherwise ``t = +-inf, p = 0`` with
    ``degenerate`` set.

    Raises:
        ValueError: If either sample has fewer than two values
    """
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError(f"each sample needs at least 2 values, got {a.size} and {b.size}")

    mean_a, mean_b = float(a.mean()), float(b.mean())
    se_a = float(a.var(ddof=1)) / a.size
    se_b = float(b.var(ddof=1)) / b.size
    se = se_a + se_b

    if se == 0.0:
        if mean_a == mean_b:
            return WelchResult(0.0, math.nan, 1.0, degenerate=True)
        t = math.copysign(math.inf, mean_a - mean_b)
        return WelchResult(t, math.nan, 0.0, degenerate=True)

    t = (mean_a - mean_b) / math.sqrt(se)
    df = se**2 / (se_a**2 / (a.size - 1) + se_b**2 / (b.size - 1))
    p = float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))
    return WelchResult(t, df, p)


class Direction(Enum):
    """Which group uses an element more."""

    MORE_IN_A = "MoreInA"
    MORE_IN_B = "MoreInB"
    NONE = "None"

    @property
    def color(self) -> str:
        return _COLORS[self]


_COLORS = {Direction.MORE_IN_A: "blue", Direction.MORE_IN_B: "red", Direction.NONE: "gray"}


@dataclass(frozen=True)
class ComparisonConfig:
    """Parameters of :func:`compare_groups`.

    Attributes:
        alpha: Significance level, 0 < alpha <= 1
        min_group_cases: Minimum cases per group, and minimum number of cases
            an element must occur in to be eligible for significance
        bonferroni: Divide alpha by the number of tested elements
        filter_fraction: Low-frequency filter applied to the union system
            before testing; None disables it
        test: Two-sample test, Welch by default
    """

    alpha: float = DEFAULT_ALPHA
    min_group_cases: int = DEFAULT_MIN_GROUP_CASES
    bonferroni: bool = False
    filter_fraction: float | None = None
    test: SampleTest = field(default=welch_t_test, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.min_group_cases < 2:
            raise ValueError(f"min_group_cases must be at least 2, got {self.min_group_cases}")
        if self.filter_fraction is not None and not 0.0 <= self.filter_fraction < 1.0:
            raise ValueError(f"filter_fraction must be in [0, 1), got {self.filter_fraction}")


@dataclass(frozen=True)
class ElementComparison:
    """Test result for one state or transition."""

    element: Element
    mean_a: float
    mean_b: float
    t: float
    df: float
    p: float
    significant: bool
    direction: Direction
    support: int = 0
    degenerate: bool = False

    @property
    def kind(self) -> str:
        return element_kind(self.element)

    @property
    def name(self) -> str:
        return element_name(self.element)

    def to_row(self) -> list[object]:
        return [
            self.name, self.kind, self.mean_a, self.mean_b, self.t, self.df, self.p,
            self.significant, self.direction.value,
        ]


@dataclass(frozen=True)
class ComparisonGraph:
    """Union transition system annotated with one comparison per element.

    Attributes:
        system: Union system over both groups, group A's cases first
        comparisons: Element -> comparison, states then transitions, by label
        cases_a: Number of group A cases
        cases_b: Number of group B cases
        alpha: Per-element significance level that was applied
    """

    system: TransitionSystem
    comparisons: dict[Element, ElementComparison]
    cases_a: int
    cases_b: int
    alpha: float

    def __getitem__(self, element: Element) -> ElementComparison:
        return self.comparisons[element]

    def __iter__(self) -> Iterator[ElementComparison]:
        return iter(self.comparisons.values())

    def __len__(self) -> int:
        return len(self.comparisons)

    def significant(self) -> list[ElementComparison]:
        return [c for c in self if c.significant]


def _compare_element(
    element: Element, vector: np.ndarray, cases_a: int, alpha: float, cfg: ComparisonConfig
) -> ElementComparison:
    group_a, group_b = vector[:cases_a], vector[cases_a:]
    mean_a, mean_b = float(group_a.mean()), float(group_b.mean())
    result = cfg.test(group_a, group_b)
    support = int(np.count_nonzero(vector))
    significant = result.p <= alpha and mean_a != mean_b and support >= cfg.min_group_cases
    if not significant:
        direction = Direction.NONE
    elif mean_a > mean_b:
        direction = Direction.MORE_IN_A
    else:
        direction = Direction.MORE_IN_B
    return ElementComparison(
        element=element,
        mean_a=mean_a,
        mean_b=mean_b,
        t=result.t,
        df=result.df,
        p=result.p,
        significant=significant,
        direction=direction,
        support=support,
        degenerate=result.degenerate,
    )


def compare_groups(
    log_a: EventLog, log_b: EventLog, cfg: ComparisonConfig | None = None
) -> ComparisonGraph:
    """Test every element of the union transition system for a group difference.

    Raises:
        ValueError: If the logs have different aggregation levels
        EmptyResultError: If a group has fewer than ``cfg.min_group_cases`` cases
    """
    cfg = cfg or ComparisonConfig()
    if log_a.aggregation is not log_b.aggregation:
        raise ValueError(
            f"cannot compare a {log_a.aggregation.value} log with a "
            f"{log_b.aggregation.value} log"
        )
    for label, log in (("A", log_a), ("B", log_b)):
        if log.case_count < cfg.min_group_cases:
            raise EmptyResultError(
                f"group {label} has {log.case_count} case(s), "
                f"at least {cfg.min_group_cases} are needed"
            )

    system = system_from_traces(log_a.traces + log_b.traces)
    if cfg.filter_fraction is not None:
        system = filter_low_frequency(system, cfg.filter_fraction)

    elements = sorted_elements(system.elements())
    alpha = cfg.alpha / len(elements) if cfg.bonferroni and elements else cfg.alpha
    cases_a = log_a.case_count

    def run(element: Element) -> ElementComparison:
        vector = system._vector(element)
        return _compare_element(element, vector, cases_a, alpha, cfg)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(run, elements))

    graph = ComparisonGraph(
        system=system,
        comparisons={c.element: c for c in results},
        cases_a=cases_a,
        cases_b=log_b.case_count,
        alpha=alpha,
    )
    degenerate = sum(1 for c in results if c.degenerate and c.mean_a != c.mean_b)
    if degenerate:
        logger.warning(f"{degenerate} element(s) have zero variance in both groups")
    logger.info(
        f"Compared {len(graph)} elements ({cases_a} vs {graph.cases_b} cases): "
        f"{len(graph.significant())} significant at alpha={alpha:g}"
    )
    return graph


def _format_number(value: float) -> str:
    return f"{value:.3g}"


def _label(comparison: ElementComparison, title: str) -> str:
    stats_line = (
        f"{_format_number(comparison.mean_a)} | {_format_number(comparison.mean_b)} | "
        f"p={_format_number(comparison.p)}"
    )
    if not title:
        return stats_line
    return graphviz.escape(title) + "\\n" + stats_line


def to_digraph(graph: ComparisonGraph, name: str = "comparison") -> graphviz.Digraph:
    """Build the annotated process map.

    Node IDs are assigned in label order, so equal graphs give equal sources.
    """
    dot = graphviz.Digraph(
        name,
        graph_attr={"rankdir": "LR"},
        node_attr={"shape": "box", "style": "rounded,filled", "fontname": "Helvetica"},
        edge_attr={"fontname": "Helvetica"},
    )
    node_ids: dict[str, str] = {}
    for index, state in enumerate(graph.system.states):
        node_ids[state] = f"n{index}"
        comparison = graph[state]
        color = comparison.direction.color
        attrs = {"fillcolor": color, "color": color}
        if state in (START, END):
            attrs["shape"] = "circle"
            title = "start" if state == START else "end"
        else:
            title = state
        dot.node(node_ids[state], _label(comparison, title), **attrs)

    for transition in graph.system.transitions:
        source, target = transition
        if source not in node_ids or target not in node_ids:
            continue
        comparison = graph[transition]
        color = comparison.direction.color
        dot.edge(
            node_ids[source],
            node_ids[target],
            label=_label(comparison, ""),
            color=color,
            fontcolor=color,
            penwidth="2" if comparison.significant else "1",
        )
    return dot


def export_dot(graph: ComparisonGraph, sink: Sink) -> None:
    """Write ``graph`` as DOT source."""
    write_text(sink, to_digraph(graph).source)
    logger.info(f"Wrote comparison graph to {source_name(sink)}")


def comparison_frame(graph: ComparisonGraph) -> pd.DataFrame:
    return pd.DataFrame([c.to_row() for c in graph], columns=list(COMPARISON_COLUMNS))


def write_comparison_csv(graph: ComparisonGraph, sink: Sink) -> None:
    """One row per element: ``element,kind,mean_a,mean_b,t,df,p,significant,direction``."""
    frame = comparison_frame(graph)
    write_text(sink, frame.to_csv(index=False, lineterminator="\n", na_rep="nan"))
    logger.info(f"Wrote {len(frame)} comparison rows to {source_name(sink)}")
