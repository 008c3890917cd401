"""Command-line interface.

Subcommands compose into the full pipeline::

    flowforge synth -o data
    flowforge prepare data/events.csv data/scores.csv -o prepared
    flowforge split prepared/prepared.csv --aggregation section -o logs
    flowforge compare logs/log.groupA.xes logs/log.groupB.xes -o diff
    flowforge stats prepared/prepared.csv -o stats

Exit codes: 0 success, 1 usage or configuration error, 2 unreadable input,
3 empty result.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Callable, NoReturn

from FlowForgeLib import __version__
from FlowForgeLib.compare import (
    DEFAULT_ALPHA,
    DEFAULT_FILTER_FRACTION,
    DEFAULT_MIN_GROUP_CASES,
    ComparisonConfig,
    compare_groups,
    export_dot,
    write_comparison_csv,
)
from FlowForgeLib.config import load_config, normalize_key, parse_bool
from FlowForgeLib.errors import (
    DEFAULT_MAX_ROW_ERRORS,
    ConfigError,
    EmptyResultError,
    InputParseError,
    RowErrorLog,
)
from FlowForgeLib.grouping import resolve_aggregation, split_cohorts
from FlowForgeLib.harmonize import (
    RuleTable,
    default_rule_table,
    drop_section_repeats,
    filter_standardized,
    harmonize_sections,
    remove_self_loops,
)
from FlowForgeLib.ingest import (
    DEFAULT_MIN_COURSE_EVENTS,
    apply_quality_filters,
    join_events_scores,
    parse_event_csv,
    parse_score_csv,
    read_prepared_csv,
    select_course,
    summarize_dataset,
    write_event_csv,
    write_prepared_csv,
    write_score_csv,
)
from FlowForgeLib.model import Aggregation, CaseScope, EventLog, GroupLabel
from FlowForgeLib.report import (
    first_section_distribution,
    group_section_change_summary,
    interaction_heatmap,
    precedence_pairs,
    safe_ratio,
    section_precedence_share,
    section_reach,
    write_distribution_csv,
    write_heatmap_csv,
    write_precedence_csv,
    write_rows_csv,
    write_summary_csv,
)
from FlowForgeLib.synth import BehaviorProfile, default_profiles, generate_clickstream
from FlowForgeLib.xes import cohort_paths, read_xes, write_xes

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_EMPTY = 3

DEFAULT_OUTPUT_DIR = "flowforge-out"

Handler = Callable[[argparse.Namespace], None]


class UsageError(Exception):
    """Raised by the parser instead of exiting."""


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors with exit code 1; argparse's 2 means bad input here."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _output_dir(args: argparse.Namespace) -> Path:
    path = Path(args.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_file(path: str) -> Path:
    """Raises InputParseError naming ``path`` if it is not a readable file."""
    file = Path(path)
    if not file.is_file():
        raise InputParseError(f"input file not found: {file}")
    return file


def _scope(args: argparse.Namespace) -> CaseScope:
    return CaseScope.CROSS_COURSE if args.scope == "cross" else CaseScope.PER_COURSE


def _aggregation(args: argparse.Namespace, scope: CaseScope) -> Aggregation:
    return resolve_aggregation(scope, section_level=args.aggregation == "section")


# ---------------------------------------------------------------------------
# prepare


def cmd_prepare(args: argparse.Namespace) -> None:
    """Parse, join, filter and optionally harmonize the raw exports."""
    events_path = _require_file(args.events)
    scores_path = _require_file(args.scores)
    out = _output_dir(args)

    events = parse_event_csv(events_path, RowErrorLog(str(events_path), args.max_row_errors))
    scores = parse_score_csv(scores_path, RowErrorLog(str(scores_path), args.max_row_errors))
    scope = CaseScope.CROSS_COURSE if args.cross_course else CaseScope.PER_COURSE

    if args.filter_before_join:
        events, filter_report = apply_quality_filters(events, args.min_course_events)
    joined, join_report = join_events_scores(events, scores, scope)
    if args.course:
        joined = select_course(joined, args.course)
        if not joined:
            raise EmptyResultError(f"no graded events for course {args.course!r}")
    if not args.filter_before_join:
        joined, filter_report = apply_quality_filters(joined, args.min_course_events)

    replacements: list[tuple[str, int]] = []
    if args.cross_course:
        rules = RuleTable.from_file(args.rules) if args.rules else default_rule_table()
        joined, replacement_report = harmonize_sections(joined, rules)
        joined = filter_standardized(joined)
        replacements = replacement_report.to_rows()
    elif args.rules:
        logger.warning("--rules has no effect without --cross-course")

    if args.drop_self_loops:
        joined = drop_section_repeats(joined)
    if not joined:
        raise EmptyResultError("no events left after joining and filtering")

    write_prepared_csv(joined, out / "prepared.csv")
    write_rows_csv(join_report.to_rows(), ("metric", "value"), out / "join_report.csv")
    write_rows_csv(
        filter_report.to_rows(), ("course_id", "removed_events"), out / "filter_report.csv"
    )
    write_rows_csv(
        replacements, ("section", "distinct_originals"), out / "replacement_report.csv"
    )
    write_rows_csv(
        summarize_dataset(joined).to_rows(), ("metric", "value"), out / "dataset_summary.csv"
    )


# ---------------------------------------------------------------------------
# split


def cmd_split_export(args: argparse.Namespace) -> None:
    """Median-split a prepared file and export both cohorts as XES."""
    events = read_prepared_csv(_require_file(args.prepared))
    scope = _scope(args)
    aggregation = _aggregation(args, scope)
    log_a, log_b, report = split_cohorts(events, aggregation, scope, tie_to_a=args.tie_to_a)

    out = _output_dir(args)
    paths = cohort_paths(out / args.name)
    write_xes(log_a, paths[GroupLabel.A])
    write_xes(log_b, paths[GroupLabel.B])
    write_rows_csv(report.to_rows(), ("metric", "value"), out / f"{args.name}.split.csv")


# ---------------------------------------------------------------------------
# compare


def _comparison_config(args: argparse.Namespace) -> ComparisonConfig:
    fraction = args.filter_frac
    if fraction is None and args.filtered:
        fraction = DEFAULT_FILTER_FRACTION
    return ComparisonConfig(
        alpha=args.alpha,
        min_group_cases=args.min_group_cases,
        bonferroni=args.bonferroni,
        filter_fraction=fraction,
    )


def cmd_compare(args: argparse.Namespace) -> None:
    """Compare two cohort logs and write the annotated graph and table."""
    cfg = _comparison_config(args)
    log_a = read_xes(_require_file(args.group_a))
    log_b = read_xes(_require_file(args.group_b))
    graph = compare_groups(log_a, log_b, cfg)

    out = _output_dir(args)
    export_dot(graph, out / f"{args.name}.dot")
    write_comparison_csv(graph, out / f"{args.name}.csv")


# ---------------------------------------------------------------------------
# stats


def _stats_logs(args: argparse.Namespace) -> tuple[EventLog, EventLog]:
    if len(args.inputs) == 2:
        return read_xes(_require_file(args.inputs[0])), read_xes(_require_file(args.inputs[1]))
    events = read_prepared_csv(_require_file(args.inputs[0]))
    scope = _scope(args)
    aggregation = resolve_aggregation(scope, section_level=True)
    log_a, log_b, _ = split_cohorts(events, aggregation, scope, tie_to_a=args.tie_to_a)
    return log_a, log_b


def cmd_stats(args: argparse.Namespace) -> None:
    """Navigation statistics of a prepared file or a pair of cohort logs."""
    if len(args.inputs) > 2:
        raise UsageError("stats takes one prepared file or two XES files")
    log_a, log_b = _stats_logs(args)

    changes = group_section_change_summary(log_a, log_b)
    no_loops = group_section_change_summary(remove_self_loops(log_a), remove_self_loops(log_b))
    summary = [
        ("cases", log_a.case_count, log_b.case_count,
         safe_ratio(log_a.case_count, log_b.case_count)),
        ("events", log_a.event_count, log_b.event_count,
         safe_ratio(log_a.event_count, log_b.event_count)),
        ("section_changes_median", changes.median_a, changes.median_b, changes.ratio),
        ("section_changes_median_no_self_loops", no_loops.median_a, no_loops.median_b,
         no_loops.ratio),
    ]

    heatmap = interaction_heatmap(log_a, log_b)
    first = {
        GroupLabel.A: first_section_distribution(log_a),
        GroupLabel.B: first_section_distribution(log_b),
    }
    reach = {
        label: {section: section_reach(log, section) for section in heatmap.sections}
        for label, log in ((GroupLabel.A, log_a), (GroupLabel.B, log_b))
    }
    seen = set(heatmap.counts[GroupLabel.A]) | set(heatmap.counts[GroupLabel.B])
    precedence = [
        (first_label, second_label,
         section_precedence_share(log_a, first_label, second_label),
         section_precedence_share(log_b, first_label, second_label))
        for first_label, second_label in precedence_pairs()
        if first_label in seen or second_label in seen
    ]

    out = _output_dir(args)
    write_heatmap_csv(heatmap, out / "heatmap.csv")
    write_summary_csv(summary, out / "summary.csv")
    write_distribution_csv(first, out / "distributions.csv")
    write_distribution_csv(reach, out / "reach.csv")
    write_precedence_csv(precedence, out / "precedence.csv")


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args: argparse.Namespace) -> None:
    """Generate a synthetic two-cohort course as raw export files."""
    if len(args.profiles) == 2:
        profile_a, profile_b = (BehaviorProfile.from_file(p) for p in args.profiles)
    elif not args.profiles:
        profile_a, profile_b = default_profiles()
    else:
        raise UsageError("synth takes either no profile or two profiles (A, then B)")

    events, scores = generate_clickstream(profile_a, profile_b, args.seed)
    out = _output_dir(args)
    write_event_csv(events, out / "events.csv")
    write_score_csv(scores, out / "scores.csv")


# ---------------------------------------------------------------------------
# parser


def _add_output_dir(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "-o", "--output-dir", default=DEFAULT_OUTPUT_DIR,
        help=f"directory for the output files (default: {DEFAULT_OUTPUT_DIR})",
    )


def _add_split_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scope", choices=("course", "cross"), default="course",
        help="case = student within one course, or (course, student) pair (default: course)",
    )
    parser.add_argument(
        "--tie-to-a", action="store_true",
        help="put cases scoring exactly the median into group A instead of B",
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    """The top-level parser and its subcommand parsers by name."""
    parser = _ArgumentParser(
        prog="flowforge", description="Cohort process mining of LMS clickstream exports."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    parser.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
    parser.add_argument("--config", help="key = value file with defaults for the subcommand")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    commands: dict[str, argparse.ArgumentParser] = {}

    prepare = subparsers.add_parser("prepare", help="parse, join and filter raw LMS exports")
    prepare.add_argument("events", help="event export CSV")
    prepare.add_argument("scores", help="score export CSV")
    _add_output_dir(prepare)
    prepare.add_argument("--course", help="keep only the course with this exact name")
    prepare.add_argument(
        "--cross-course", action="store_true",
        help="harmonize section titles and keep standard sections only",
    )
    prepare.add_argument(
        "--drop-self-loops", action="store_true",
        help="drop events repeating the previous event's section",
    )
    prepare.add_argument("--rules", help="harmonization rule file (pattern<TAB>replacement)")
    prepare.add_argument(
        "--min-course-events", type=int, default=DEFAULT_MIN_COURSE_EVENTS,
        help=f"remove courses with fewer events (default: {DEFAULT_MIN_COURSE_EVENTS})",
    )
    prepare.add_argument(
        "--filter-before-join", action="store_true",
        help="apply the course-size filter to the raw events instead of the joined ones",
    )
    prepare.add_argument(
        "--max-row-errors", type=int, default=DEFAULT_MAX_ROW_ERRORS,
        help=f"bad rows tolerated per file (default: {DEFAULT_MAX_ROW_ERRORS})",
    )
    prepare.set_defaults(handler=cmd_prepare)
    commands["prepare"] = prepare

    split = subparsers.add_parser("split", help="median-split a prepared file into two XES logs")
    split.add_argument("prepared", help="prepared CSV written by 'prepare'")
    _add_output_dir(split)
    split.add_argument("--name", default="log", help="output file prefix (default: log)")
    _add_split_options(split)
    split.add_argument(
        "--aggregation", choices=("activity", "section"), default="section",
        help="activity labels: event names or sections (default: section)",
    )
    split.set_defaults(handler=cmd_split_export)
    commands["split"] = split

    compare = subparsers.add_parser("compare", help="compare two cohort logs")
    compare.add_argument("group_a", help="XES log of group A")
    compare.add_argument("group_b", help="XES log of group B")
    _add_output_dir(compare)
    compare.add_argument(
        "--name", default="comparison", help="output file prefix (default: comparison)"
    )
    compare.add_argument(
        "--alpha", type=float, default=DEFAULT_ALPHA,
        help=f"significance level (default: {DEFAULT_ALPHA})",
    )
    compare.add_argument(
        "--filtered", action="store_true",
        help=f"drop the least frequent {DEFAULT_FILTER_FRACTION:.0%} of states and transitions",
    )
    compare.add_argument("--filter-frac", type=float, help="fraction dropped by the filter")
    compare.add_argument(
        "--bonferroni", action="store_true", help="divide alpha by the number of elements"
    )
    compare.add_argument(
        "--min-group-cases", type=int, default=DEFAULT_MIN_GROUP_CASES,
        help=f"minimum cases per group (default: {DEFAULT_MIN_GROUP_CASES})",
    )
    compare.set_defaults(handler=cmd_compare)
    commands["compare"] = compare

    stats = subparsers.add_parser("stats", help="section navigation statistics")
    stats.add_argument(
        "inputs", nargs="+", metavar="input",
        help="one prepared CSV, or the XES logs of group A and group B",
    )
    _add_output_dir(stats)
    _add_split_options(stats)
    stats.set_defaults(handler=cmd_stats)
    commands["stats"] = stats

    synth = subparsers.add_parser("synth", help="generate a synthetic two-cohort course")
    synth.add_argument(
        "profiles", nargs="*", metavar="profile",
        help="profile files of group A and group B (default: built-in profiles)",
    )
    _add_output_dir(synth)
    synth.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    synth.set_defaults(handler=cmd_synth)
    commands["synth"] = synth

    return parser, commands


def _config_defaults(
    subparser: argparse.ArgumentParser, values: dict[str, str], source: str
) -> dict[str, object]:
    """Convert config values with the types of the subcommand's options."""
    options = {
        action.dest: action
        for action in subparser._actions
        if action.option_strings and action.dest != "help"
    }
    defaults: dict[str, object] = {}
    for key, raw in values.items():
        action = options.get(normalize_key(key))
        if action is None:
            raise ConfigError(f"{source}: unknown setting {key!r} for this command")
        try:
            if isinstance(action, argparse._StoreTrueAction):
                value: object = parse_bool(raw, key)
            elif action.type is not None:
                value = action.type(raw)  # type: ignore[operator]
            else:
                value = raw
        except ValueError as e:
            raise ConfigError(f"{source}: {key}: {e}") from e
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"{source}: {key} must be one of {', '.join(action.choices)}")
        defaults[action.dest] = value
    return defaults


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse ``argv``; settings from ``--config`` fill in flags not given."""
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a command is required (see --help)")
    if args.config:
        subparser = commands[args.command]
        subparser.set_defaults(**_config_defaults(subparser, load_config(args.config), args.config))
        args = parser.parse_args(argv)
    return args


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand and return its exit code."""
    try:
        args = parse_args(argv)
        configure_logging(args.verbose, args.quiet)
        handler: Handler = args.handler
        handler(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except InputParseError as e:
        logger.error(str(e))
        return EXIT_INPUT
    except EmptyResultError as e:
        logger.error(str(e))
        return EXIT_EMPTY
    except (ConfigError, ValueError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"cannot access {e.filename or 'file'}: {e.strerror or e}")
        return EXIT_INPUT
    return EXIT_OK
