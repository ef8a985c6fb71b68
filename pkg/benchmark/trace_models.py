"""
This module defines benchmark trace events and their JSON-lines file format.

Classes:
    EventType: observe | query | tick.
    Category: critical | contextual.
    ConflictType: contradiction | update | overlap.
    ConflictLabel: Ground truth of one injected conflict.
    TraceLabels: Ground-truth labels of an event.
    TraceEvent: One trace event.

Functions:
    validate_trace(events) -> None:
        Raises TraceError unless events are sorted and every reference points to an earlier observation.

    write_trace(events, path) -> None / read_trace(path) -> list[TraceEvent]:
        One JSON object per line.

    trace_from_event_log(events) -> list[TraceEvent]:
        Operation entries of a store event log as an unlabelled trace.
"""
import json
from collections.abc import Sequence
from enum import StrEnum
from pathlib import Path

import aiofiles
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from core.exceptions import TraceError
from core.models import Timestamp
from store.event_log import EventKind, StoreEvent

FIELD_SEPARATOR = "|"
EVENT_ID_WIDTH = 6


class EventType(StrEnum):
    OBSERVE = "observe"
    QUERY = "query"
    TICK = "tick"


class Category(StrEnum):
    CRITICAL = "critical"
    CONTEXTUAL = "contextual"


class ConflictType(StrEnum):
    CONTRADICTION = "contradiction"
    UPDATE = "update"
    OVERLAP = "overlap"


class ConflictLabel(BaseModel):
    """An injected conflict: its family, the statement it conflicts with and the strategy that should apply."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    type: ConflictType
    target_id: str
    correct_strategy: str


class TraceLabels(BaseModel):
    """
    Ground truth attached to an event.

    Attributes:
        category (Category | None): Category of an observation, or of the fact a query asks about.
        relevant_ids (tuple[str, ...]): Observations relevant to a query.
        conflict (ConflictLabel | None): Set on observations that inject a conflict.
        conflict_ref (str | None): On post-conflict queries, the conflicting observation's id.
        canonical_query (str | None): On observations, the query that should recover them.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    category: Category | None = None
    relevant_ids: tuple[str, ...] = ()
    conflict: ConflictLabel | None = None
    conflict_ref: str | None = None
    canonical_query: str | None = None


class TraceEvent(BaseModel):
    """
    One event of a benchmark trace.

    Attributes:
        event_id (str): Unique id, referenced by labels of later events.
        at (Timestamp): Virtual time in days.
        kind (EventType): observe, query or tick.
        text (str): Observed content or query text; empty for ticks.
        labels (TraceLabels): Ground truth.
        fact_key (str | None): "subject|predicate" of a templated critical fact.
        value (str | None): Value asserted by a critical observation, or the current value for a query.
        k (int | None): Result count of a query; the runner's default when None.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    event_id: str
    at: Timestamp = Field(ge=0)
    kind: EventType
    text: str = ""
    labels: TraceLabels = TraceLabels()
    fact_key: str | None = None
    value: str | None = None
    k: int | None = Field(default=None, ge=1)

    @property
    def fact_text(self) -> str | None:
        """The "subject|predicate|value" string a critical observation asserts."""
        if self.fact_key is None or self.value is None:
            return None
        return f"{self.fact_key}{FIELD_SEPARATOR}{self.value}"


def validate_trace(events: Sequence[TraceEvent]) -> None:
    """
    Checks ordering and references of a trace.

    Raises:
        TraceError: On unsorted events, duplicate ids, empty observations or a reference that is not an
            earlier observation.
    """
    observed: set[str] = set()
    seen: set[str] = set()
    previous_at = 0.0
    for event in events:
        if event.event_id in seen:
            raise TraceError(f"duplicate event id {event.event_id}")
        seen.add(event.event_id)
        if event.at < previous_at:
            raise TraceError(f"event {event.event_id} at t={event.at} precedes t={previous_at}")
        previous_at = event.at
        if event.kind is not EventType.TICK and not event.text.strip():
            raise TraceError(f"event {event.event_id} has no text")
        references = list(event.labels.relevant_ids)
        if event.labels.conflict is not None:
            references.append(event.labels.conflict.target_id)
        if event.labels.conflict_ref is not None:
            references.append(event.labels.conflict_ref)
        dangling = [reference for reference in references if reference not in observed]
        if dangling:
            raise TraceError(f"event {event.event_id} references unknown observations {dangling}")
        if event.kind is EventType.OBSERVE:
            observed.add(event.event_id)


async def write_trace(events: Sequence[TraceEvent], path: str | Path) -> None:
    async with aiofiles.open(path, "w", encoding="utf-8") as trace_file:
        for event in events:
            await trace_file.write(json.dumps(event.model_dump(mode="json"), sort_keys=True, ensure_ascii=False))
            await trace_file.write("\n")


async def read_trace(path: str | Path) -> list[TraceEvent]:
    """
    Reads and validates a JSON-lines trace.

    Raises:
        TraceError: If the file is missing, a line is malformed or the trace fails `validate_trace`.
    """
    try:
        async with aiofiles.open(path, encoding="utf-8") as trace_file:
            lines = await trace_file.readlines()
    except FileNotFoundError as error:
        raise TraceError(f"trace file {path} does not exist") from error
    events = []
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            events.append(TraceEvent.model_validate_json(line))
        except ValidationError as error:
            raise TraceError(f"line {line_number} of {path} is not a trace event: {error}") from error
    validate_trace(events)
    return events


def trace_from_event_log(events: Sequence[StoreEvent]) -> list[TraceEvent]:
    """
    Converts the operation entries of a store event log into a trace that replays them.

    Observations keep a valid category label; queries keep their k.
    """
    trace = []
    for event in events:
        if not event.is_operation:
            continue
        event_id = f"e{len(trace) + 1:0{EVENT_ID_WIDTH}d}"
        if event.kind is EventKind.OBSERVE:
            label = event.payload.get("category_label")
            category = Category(label) if label in set(Category) else None
            trace.append(TraceEvent(
                event_id=event_id,
                at=event.at,
                kind=EventType.OBSERVE,
                text=event.payload["text"],
                labels=TraceLabels(category=category),
            ))
        elif event.kind is EventKind.QUERY:
            trace.append(TraceEvent(
                event_id=event_id, at=event.at, kind=EventType.QUERY, text=event.payload["text"], k=event.payload["k"],
            ))
        else:
            trace.append(TraceEvent(event_id=event_id, at=event.at, kind=EventType.TICK))
    return trace
