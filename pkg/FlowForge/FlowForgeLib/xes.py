"""XES serialization.

Writes and reads a minimal XES profile: ``log``/``trace``/``event`` elements
with the concept and time extensions. Each trace carries its case ID as
``concept:name``; each event its activity label as ``concept:name`` and its
instant as ``time:timestamp`` (ISO 8601, milliseconds, UTC offset).
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from datetime import datetime
from pathlib import Path
from xml.sax.saxutils import escape

from FlowForgeLib.errors import InputParseError
from FlowForgeLib.files import Sink, Source, open_sink, open_source, source_name
from FlowForgeLib.model import Aggregation, CaseId, EventLog, EventRow, GroupLabel

logger = logging.getLogger(__name__)

CONCEPT_NAME = "concept:name"
TIME_TIMESTAMP = "time:timestamp"
# Log-level attribute recording the aggregation level of the labels
AGGREGATION_KEY = "flowforge:aggregation"

_HEADER = (
    '<?xml version="1.0" encoding="UTF-8"?>\n'
    '<log xes.version="1849-2016" xmlns="http://www.xes-standard.org/">\n'
    '  <extension name="Concept" prefix="concept"'
    ' uri="http://www.xes-standard.org/concept.xesext"/>\n'
    '  <extension name="Time" prefix="time" uri="http://www.xes-standard.org/time.xesext"/>\n'
)
_FOOTER = "</log>\n"

_ATTRIBUTE_ENTITIES = {'"': "&quot;", "\n": "&#10;", "\r": "&#13;", "\t": "&#9;"}


def _attr(value: str) -> str:
    return escape(value, _ATTRIBUTE_ENTITIES)


def format_xes_timestamp(value: datetime) -> str:
    """``2022-08-30T17:25:20.000+02:00``."""
    return value.isoformat(timespec="milliseconds")


def parse_xes_timestamp(text: str) -> datetime:
    """Parse an XES date value; a trailing ``Z`` means UTC."""
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    value = datetime.fromisoformat(text)
    if value.utcoffset() is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return value


def cohort_paths(prefix: Path | str) -> dict[GroupLabel, Path]:
    """File names of a cohort pair: ``<prefix>.groupA.xes`` and ``<prefix>.groupB.xes``."""
    prefix = str(prefix)
    return {label: Path(f"{prefix}.group{label.value}.xes") for label in GroupLabel}


def write_xes(log: EventLog, sink: Sink) -> None:
    """Write ``log`` as XES, one trace at a time."""
    with open_sink(sink) as write:
        write(_HEADER)
        write(f'  <string key="{AGGREGATION_KEY}" value="{_attr(log.aggregation.value)}"/>\n')
        for trace in log:
            write("  <trace>\n")
            write(f'    <string key="{CONCEPT_NAME}" value="{_attr(trace.case_id.value)}"/>\n')
            for event in trace.events:
                write(
                    "    <event>\n"
                    f'      <string key="{CONCEPT_NAME}" value="{_attr(event.activity)}"/>\n'
                    f'      <date key="{TIME_TIMESTAMP}" '
                    f'value="{format_xes_timestamp(event.timestamp)}"/>\n'
                    "    </event>\n"
                )
            write("  </trace>\n")
        write(_FOOTER)
    logger.info(
        f"Wrote {log.case_count} traces ({log.event_count} events) to {source_name(sink)}"
    )


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _attributes(element: ET.Element) -> dict[str, str]:
    return {
        child.get("key", ""): child.get("value", "")
        for child in element
        if _local(child.tag) in ("string", "date") and child.get("key")
    }


def read_xes(source: Source, aggregation: Aggregation | None = None) -> EventLog:
    """Read an XES document into an event log.

    Args:
        source: Path or binary stream
        aggregation: Aggregation level to assume when the document does not
            record one; defaults to the activity level

    Raises:
        InputParseError: On malformed XML, or a trace or event lacking
            ``concept:name`` / ``time:timestamp``, or two traces naming the
            same case
    """
    name = source_name(source)
    recorded: Aggregation | None = None
    rows: list[EventRow] = []
    seen: set[str] = set()
    trace_index = 0
    order = 0

    with open_source(source) as stream:
        try:
            for _, element in ET.iterparse(stream, events=("end",)):
                tag = _local(element.tag)
                if tag == "string" and element.get("key") == AGGREGATION_KEY:
                    try:
                        recorded = Aggregation(element.get("value", ""))
                    except ValueError as e:
                        raise InputParseError(f"{name}: unknown aggregation level: {e}") from e
                elif tag == "trace":
                    attributes = _attributes(element)
                    case_name = attributes.get(CONCEPT_NAME)
                    if not case_name:
                        raise InputParseError(f"{name}: trace {trace_index} has no {CONCEPT_NAME}")
                    if case_name in seen:
                        raise InputParseError(
                            f"{name}: trace {trace_index} repeats case {case_name!r}"
                        )
                    seen.add(case_name)
                    case_id = CaseId.parse(case_name)
                    events = [child for child in element if _local(child.tag) == "event"]
                    if not events:
                        logger.warning(f"{name}: trace {case_name!r} has no events, skipped")
                    for event_index, event in enumerate(events):
                        row = _event_row(name, case_id, trace_index, event_index, event, order)
                        rows.append(row)
                        order += 1
                    trace_index += 1
                    element.clear()
        except ET.ParseError as e:
            raise InputParseError(f"{name}: malformed XML: {e}") from e

    level = recorded or aggregation or Aggregation.ACTIVITY
    try:
        log = EventLog.from_rows(level, rows)
    except ValueError as e:
        raise InputParseError(f"{name}: {e}") from e
    logger.info(f"Read {log.case_count} traces ({log.event_count} events) from {name}")
    return log


def _event_row(
    name: str, case_id: CaseId, trace_index: int, event_index: int, event: ET.Element, order: int
) -> EventRow:
    attributes = _attributes(event)
    where = f"{name}: trace {trace_index} ({case_id}), event {event_index}"
    label = attributes.get(CONCEPT_NAME)
    if label is None:
        raise InputParseError(f"{where} has no {CONCEPT_NAME}")
    stamp = attributes.get(TIME_TIMESTAMP)
    if stamp is None:
        raise InputParseError(f"{where} has no {TIME_TIMESTAMP}")
    try:
        timestamp = parse_xes_timestamp(stamp)
    except ValueError as e:
        raise InputParseError(f"{where}: {e}") from e
    return EventRow(case_id, timestamp, label, order)
