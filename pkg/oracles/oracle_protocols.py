"""
This module declares the oracle capabilities the conflict and fusion stages depend on.

Classes:
    RelationOracle (Protocol): classify(text_a, text_b) -> RelationVerdict.
    MergeOracle (Protocol): merge(ordered texts) -> merged text.
    PreservationOracle (Protocol): preservation_score(sources, merged) -> float in [0, 1].

Implementations must tolerate concurrent calls and raise `core.exceptions.OracleError`
subclasses on failure.
"""
from collections.abc import Sequence
from typing import Protocol, runtime_checkable

from conflict.conflict_models import RelationVerdict


@runtime_checkable
class RelationOracle(Protocol):
    """Classifies the relation of a new text (a) to an existing text (b)."""

    async def classify(self, text_a: str, text_b: str) -> RelationVerdict:
        ...  # noqa: WPS428


@runtime_checkable
class MergeOracle(Protocol):
    """Merges texts ordered by creation time into one consolidated text."""

    async def merge(self, texts: Sequence[str]) -> str:
        ...  # noqa: WPS428


@runtime_checkable
class PreservationOracle(Protocol):
    """Scores how much of the source information a merged text preserves."""

    async def preservation_score(self, sources: Sequence[str], merged: str) -> float:
        ...  # noqa: WPS428
