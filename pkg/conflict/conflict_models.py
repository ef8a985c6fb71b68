"""
This module defines the values exchanged by conflict detection and resolution.

Classes:
    Relation: compatible | contradictory | subsumes | subsumed.
    RelationVerdict: One classification of a (new, existing) text pair.
    FieldChange: Audit entry for one modified field.
    ResolutionOutcome: Everything a resolution decided, for the store to apply.

Functions:
    strategy_for(relation: Relation) -> str:
        Name of the resolution strategy a relation triggers (coexist, suppress, merge).
"""
from enum import StrEnum

from pydantic import BaseModel, ConfigDict

from core.models import MemoryRecord

STRATEGY_COEXIST = "coexist"
STRATEGY_SUPPRESS = "suppress"
STRATEGY_MERGE = "merge"


class Relation(StrEnum):
    """
    Relation of a new memory to an existing one.

    SUBSUMES: the new memory absorbs the existing one.
    SUBSUMED: the existing memory absorbs the new one.
    """

    COMPATIBLE = "compatible"
    CONTRADICTORY = "contradictory"
    SUBSUMES = "subsumes"
    SUBSUMED = "subsumed"

    def mirrored(self) -> "Relation":
        """The relation seen from the other side of the pair."""
        if self is Relation.SUBSUMES:
            return Relation.SUBSUMED
        if self is Relation.SUBSUMED:
            return Relation.SUBSUMES
        return self


class RelationVerdict(BaseModel):
    """Output of a relation oracle for one text pair."""

    model_config = ConfigDict(frozen=True)

    relation: Relation
    rationale: str | None = None


class FieldChange(BaseModel):
    """One modified field of one record."""

    model_config = ConfigDict(frozen=True)

    record_id: str
    field: str
    old: float | str
    new: float | str


class ResolutionOutcome(BaseModel):
    """
    Audit trail and effects of resolving one new memory against its candidates.

    Attributes:
        kept (list[str]): Ids present after resolution, the new memory included when inserted.
        modified (list[FieldChange]): Field-level changes applied to existing records.
        merged_content (str | None): Content produced by the last subsumption merge.
        applied (dict[str, Relation]): Relation applied per candidate id.
        fallbacks (list[str]): Human-readable notes about oracle failures and their fallbacks.
        updated (dict[str, MemoryRecord]): New values of modified existing records.
        removed (list[str]): Ids of existing records absorbed by the new memory.
        inserted (MemoryRecord | None): The new memory as it should be inserted, None if absorbed.
        absorbed_into (str | None): Id of the record that absorbed the new memory.
        merge_failed (bool): True when a merge oracle failure left both memories unchanged.
    """

    model_config = ConfigDict(frozen=True)

    kept: list[str] = []
    modified: list[FieldChange] = []
    merged_content: str | None = None
    applied: dict[str, Relation] = {}
    fallbacks: list[str] = []
    updated: dict[str, MemoryRecord] = {}
    removed: list[str] = []
    inserted: MemoryRecord | None = None
    absorbed_into: str | None = None
    merge_failed: bool = False


def strategy_for(relation: Relation) -> str:
    """Name of the resolution strategy a relation triggers."""
    if relation is Relation.CONTRADICTORY:
        return STRATEGY_SUPPRESS
    if relation in {Relation.SUBSUMES, Relation.SUBSUMED}:
        return STRATEGY_MERGE
    return STRATEGY_COEXIST
