"""FlowForgeLib - Core library of the FlowForge clickstream process-mining pipeline.

This package turns LMS clickstream exports into cohort process comparisons:
- ingest: Parse event/score CSV exports, join them and filter small courses
- harmonize: Rewrite free-form section titles into a standard schema
- grouping: Build cases and split them into cohorts at the median score
- xes: Write and read XES event logs
- mining: Directly-follows transition systems with per-case frequencies
- compare: Per-element significance tests and annotated DOT graphs
- report: Section navigation statistics
- synth: Seeded synthetic cohorts for end-to-end validation
"""

from FlowForgeLib.compare import ComparisonConfig, ComparisonGraph, compare_groups, welch_t_test
from FlowForgeLib.errors import ConfigError, EmptyResultError, FlowForgeError, InputParseError
from FlowForgeLib.harmonize import RuleTable, default_rule_table
from FlowForgeLib.mining import TransitionSystem, build_transition_system
from FlowForgeLib.model import Aggregation, CaseId, CaseScope, EventLog, GroupLabel, Trace
from FlowForgeLib.synth import BehaviorProfile, generate_cohort_pair

__all__ = [
    "Aggregation",
    "BehaviorProfile",
    "CaseId",
    "CaseScope",
    "ComparisonConfig",
    "ComparisonGraph",
    "ConfigError",
    "EmptyResultError",
    "EventLog",
    "FlowForgeError",
    "GroupLabel",
    "InputParseError",
    "RuleTable",
    "Trace",
    "TransitionSystem",
    "build_transition_system",
    "compare_groups",
    "default_rule_table",
    "generate_cohort_pair",
    "welch_t_test",
]

__version__ = "0.1.0"
