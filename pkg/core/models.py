"""
This module defines the memory record and the small value types every other package shares.

Types:
    Timestamp: Virtual time in days since the start of a run.
    Embedding: Unit-norm vector stored as a tuple of float32-representable floats.

Classes:
    Layer: The two memory layers (LML, SML).
    MemoryRecord: One stored memory with its strength anchor, access history and layer.
"""
import math
from enum import StrEnum
from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

Timestamp = float
Embedding = tuple[float, ...]

NORM_TOLERANCE = 1e-6


class Layer(StrEnum):
    """Memory layer: long-term (slow, sub-linear decay) or short-term (fast, super-linear decay)."""

    LML = "LML"
    SML = "SML"


class MemoryRecord(BaseModel):
    """
    One stored memory.

    Strength is not stored directly: it is re-derived from (anchor_strength, anchor_time)
    and the cached importance whenever it is needed, see `dynamics.memory_dynamics.strength_at`.

    Attributes:
        id (str): Unique identifier inside one store.
        content (str): The memory text.
        embedding (Embedding): Unit-norm content embedding.
        anchor_strength (float): Strength at anchor_time, in [0, 1].
        anchor_time (Timestamp): Time the strength anchor was last reset.
        created_at (Timestamp): Creation time of the memory.
        access_times (tuple[Timestamp, ...]): Ascending access history.
        layer (Layer): Current layer.
        importance (float): Importance cached from the last evaluation.
        decay_scale (float): Multiplier on lambda_base, below 1 for fused memories.
        category_label (str | None): Benchmark-only tag (critical | contextual).
        merged_ids (tuple[str, ...]): Ids of memories absorbed into this one.
        fused (bool): True when the record is the product of a fusion.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(min_length=1)
    content: str = Field(min_length=1)
    embedding: Embedding
    anchor_strength: float = Field(ge=0, le=1)
    anchor_time: Timestamp
    created_at: Timestamp = Field(ge=0)
    access_times: tuple[Timestamp, ...] = ()
    layer: Layer = Layer.SML
    importance: float = Field(default=0, ge=0, le=1)
    decay_scale: float = Field(default=1, gt=0, le=1)
    category_label: str | None = None
    merged_ids: tuple[str, ...] = ()
    fused: bool = False

    @model_validator(mode="after")
    def _check_invariants(self) -> Self:
        if not all(math.isfinite(timestamp) for timestamp in (self.anchor_time, self.created_at, *self.access_times)):
            raise ValueError("timestamps must be finite")
        if self.anchor_time < self.created_at:
            raise ValueError("anchor_time must not precede created_at")
        if self.access_times and self.access_times[0] < self.created_at:
            raise ValueError("access_times must not precede created_at")
        if any(later < earlier for earlier, later in zip(self.access_times, self.access_times[1:])):
            raise ValueError("access_times must be sorted ascending")
        norm = math.sqrt(math.fsum(component * component for component in self.embedding))
        if abs(norm - 1) > NORM_TOLERANCE:
            raise ValueError(f"embedding must be unit-norm, got norm {norm:.8f}")
        return self

    @property
    def last_touched(self) -> Timestamp:
        """The later of the last access and the creation time."""
        if self.access_times:
            return max(self.access_times[-1], self.created_at)
        return self.created_at

    def __str__(self) -> str:
        return self.content

    def __repr__(self) -> str:
        return (
            f"MemoryRecord(id={self.id}, layer={self.layer}, v0={self.anchor_strength:.4f}, "
            f"I={self.importance:.4f}, content={self.content[:40]!r})"
        )
