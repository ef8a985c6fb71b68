"""
This module defines the store's append-only event log.

Operation entries (observe, query, tick) record the inputs of every mutating call and are enough to
replay a run; audit entries (insert, update, remove, prune, evict, merge, fuse, layer) record each
structural change the pipeline made.

Classes:
    EventKind: Every kind of log entry.
    StoreEvent: One log entry.
    EventLog: Append-only list of StoreEvent with a few filters.
"""
from collections.abc import Iterator
from enum import StrEnum
from typing import Any

from pydantic import BaseModel, ConfigDict

from core.models import Timestamp


class EventKind(StrEnum):
    OBSERVE = "observe"
    QUERY = "query"
    TICK = "tick"
    INSERT = "insert"
    UPDATE = "update"
    REMOVE = "remove"
    PRUNE = "prune"
    EVICT = "evict"
    MERGE = "merge"
    FUSE = "fuse"
    LAYER = "layer"


OPERATION_KINDS = frozenset({EventKind.OBSERVE, EventKind.QUERY, EventKind.TICK})


class StoreEvent(BaseModel):
    """
    One log entry.

    Attributes:
        seq (int): Position in the log, from 0.
        at (Timestamp): Virtual time of the operation that produced the entry.
        kind (EventKind): Entry kind.
        payload (dict[str, Any]): JSON-compatible details; operation entries hold the call's inputs.
    """

    model_config = ConfigDict(frozen=True)

    seq: int
    at: Timestamp
    kind: EventKind
    payload: dict[str, Any] = {}

    @property
    def is_operation(self) -> bool:
        return self.kind in OPERATION_KINDS


class EventLog:
    """Append-only event list."""

    def __init__(self, events: list[StoreEvent] | None = None) -> None:
        self._events: list[StoreEvent] = list(events or [])

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[StoreEvent]:
        return iter(self._events)

    def append(self, at: Timestamp, kind: EventKind, **payload: Any) -> StoreEvent:
        event = StoreEvent(seq=len(self._events), at=at, kind=kind, payload=payload)
        self._events.append(event)
        return event

    def events(self) -> tuple[StoreEvent, ...]:
        return tuple(self._events)

    def operations(self) -> list[StoreEvent]:
        """Operation entries only, in log order."""
        return [event for event in self._events if event.is_operation]

    def count(self, kind: EventKind) -> int:
        return sum(1 for event in self._events if event.kind is kind)
