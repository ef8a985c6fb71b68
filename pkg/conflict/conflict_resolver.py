"""
This module detects memories that overlap an incoming one and applies the four resolution strategies.

Resolution is pure: it returns a `ResolutionOutcome` describing new record values and removals,
and the store applies it.

Functions:
    find_conflict_candidates(new, store_view, cfg) -> list[MemoryRecord]:
        Records with similarity above theta_sim, most similar first, older first on ties.

    suppression_factor(tau_new, tau_existing, cfg) -> float:
        exp(-rho * clip((tau_new - tau_existing) / w_age_days, 0, 1)).

    resolve_compatible(existing, sim, cfg) -> MemoryRecord:
        Redundancy penalty on importance.

    resolve_contradictory(existing, tau_new, now, cfg) -> MemoryRecord:
        Suppression of an older contradicting memory.

    resolve_subsumption(general, specific, merger, now, cfg, embedder=None) -> ResolutionOutcome:
        The general memory absorbs the specific one.

    resolve(new, candidates, classifier, merger, now, cfg, embedder=None) -> ResolutionOutcome:
        Classifies and resolves the new memory against each candidate in order.
"""
import logging
import math
from collections.abc import Sequence

from conflict.conflict_models import FieldChange, Relation, ResolutionOutcome
from core.config import EngineConfig
from core.exceptions import EmbeddingError, OracleError
from core.models import MemoryRecord, Timestamp
from dynamics.memory_dynamics import strength_at
from embedding.embedding_provider import EmbeddingProvider, similarity_scores, tokenize
from oracles.oracle_protocols import MergeOracle, RelationOracle

logger = logging.getLogger(__name__)


def _ranked_candidates(
    new: MemoryRecord,
    store_view: Sequence[MemoryRecord],
    cfg: EngineConfig,
) -> list[tuple[MemoryRecord, float]]:
    others = [record for record in store_view if record.id != new.id]
    scores = similarity_scores(new.embedding, [record.embedding for record in others])
    matches = [
        (record, float(score))
        for record, score in zip(others, scores, strict=True)
        if score > cfg.theta_sim
    ]
    matches.sort(key=lambda match: (-match[1], match[0].created_at, match[0].id))
    return matches


def find_conflict_candidates(
    new: MemoryRecord,
    store_view: Sequence[MemoryRecord],
    cfg: EngineConfig,
) -> list[MemoryRecord]:
    """
    Memories semantically close enough to the new one to be classified.

    Args:
        new (MemoryRecord): The incoming memory; a record with the same id in the view is ignored.
        store_view (Sequence[MemoryRecord]): Current records.
        cfg (EngineConfig): Supplies theta_sim.

    Returns:
        list[MemoryRecord]: Records with cosine similarity strictly above theta_sim, sorted by similarity
        descending, then older created_at, then id.
    """
    return [record for record, _ in _ranked_candidates(new, store_view, cfg)]


def suppression_factor(tau_new: Timestamp, tau_existing: Timestamp, cfg: EngineConfig) -> float:
    """Multiplier applied to an older contradicted memory's strength."""
    age_gap = (tau_new - tau_existing) / cfg.w_age_days
    return math.exp(-cfg.rho * min(1.0, max(0.0, age_gap)))


def resolve_compatible(existing: MemoryRecord, sim: float, cfg: EngineConfig) -> MemoryRecord:
    """
    Redundancy penalty: importance <- importance * (1 - omega * sim).

    Args:
        existing (MemoryRecord): The compatible existing memory.
        sim (float): Similarity in [0, 1]; values outside are clamped.
        cfg (EngineConfig): Supplies omega.

    Returns:
        MemoryRecord: The record with reduced importance; the same record when sim is 0.
    """
    sim = min(1.0, max(0.0, sim))
    if sim == 0:
        return existing
    return existing.model_copy(update={"importance": existing.importance * (1 - cfg.omega * sim)})


def resolve_contradictory(
    existing: MemoryRecord,
    tau_new: Timestamp,
    now: Timestamp,
    cfg: EngineConfig,
) -> MemoryRecord:
    """
    Newer information suppresses older: v <- v(now) * suppression_factor, re-anchored at `now`.

    Args:
        existing (MemoryRecord): The contradicted memory.
        tau_new (Timestamp): Creation time of the contradicting memory.
        now (Timestamp): Resolution time.
        cfg (EngineConfig): Supplies rho and w_age_days.

    Returns:
        MemoryRecord: The suppressed record; the same record when the new memory is not newer.
    """
    factor = suppression_factor(tau_new, existing.created_at, cfg)
    if factor == 1:
        return existing
    return existing.model_copy(update={
        "anchor_strength": strength_at(existing, now, cfg) * factor,
        "anchor_time": max(now, existing.anchor_time),
    })


async def resolve_subsumption(
    general: MemoryRecord,
    specific: MemoryRecord,
    merger: MergeOracle,
    now: Timestamp,
    cfg: EngineConfig,
    embedder: EmbeddingProvider | None = None,
) -> ResolutionOutcome:
    """
    The general memory absorbs the specific one.

    When every token of the specific memory already appears in the general one the content is kept as is;
    otherwise the merger consolidates both texts, oldest first, and the result is re-embedded.
    The general record keeps its id and layer and takes the earlier created_at of the two, so the united
    access history stays within its lifetime; the anchor becomes (max of both current strengths, now).

    Args:
        general (MemoryRecord): The absorbing memory.
        specific (MemoryRecord): The absorbed memory.
        merger (MergeOracle): Produces the consolidated content.
        now (Timestamp): Resolution time.
        cfg (EngineConfig): Decay parameters for the current strengths.
        embedder (EmbeddingProvider | None): Re-embeds merged content; the general embedding is kept without one.

    Returns:
        ResolutionOutcome: The updated general record and the removed specific id, or `merge_failed`
        with both records untouched.
    """
    if set(tokenize(specific.content)) <= set(tokenize(general.content)):
        merged_content = general.content
        embedding = general.embedding
    else:
        ordered = sorted((general, specific), key=lambda record: (record.created_at, record.id))
        try:
            merged_content = await merger.merge([record.content for record in ordered])
            embedding = general.embedding if embedder is None else await embedder.embed(merged_content)
        except (OracleError, EmbeddingError) as error:
            logger.warning("Merge of %s into %s failed: %s", specific.id, general.id, error)
            return ResolutionOutcome(
                kept=[general.id, specific.id],
                merge_failed=True,
                fallbacks=[f"{specific.id}: merge into {general.id} failed ({error}); both retained"],
            )
    strength = max(strength_at(general, now, cfg), strength_at(specific, now, cfg))
    access_times = tuple(sorted(set(general.access_times) | set(specific.access_times)))
    absorbed = general.model_copy(update={
        "content": merged_content,
        "embedding": embedding,
        "anchor_strength": strength,
        "anchor_time": max(now, general.anchor_time),
        "created_at": min(general.created_at, specific.created_at),
        "access_times": access_times,
        "merged_ids": (*general.merged_ids, specific.id, *specific.merged_ids),
    })
    modified = [FieldChange(record_id=general.id, field="anchor_strength", old=general.anchor_strength, new=strength)]
    if merged_content != general.content:
        modified.append(FieldChange(record_id=general.id, field="content", old=general.content, new=merged_content))
    return ResolutionOutcome(
        kept=[general.id],
        modified=modified,
        merged_content=merged_content,
        updated={general.id: absorbed},
        removed=[specific.id],
    )


class _Resolution:
    """Mutable accumulator for one `resolve` call."""

    def __init__(self, new: MemoryRecord) -> None:
        self.new: MemoryRecord | None = new
        self.updated: dict[str, MemoryRecord] = {}
        self.removed: list[str] = []
        self.modified: list[FieldChange] = []
        self.applied: dict[str, Relation] = {}
        self.fallbacks: list[str] = []
        self.merged_content: str | None = None
        self.absorbed_into: str | None = None
        self.merge_failed = False

    def update(self, before: MemoryRecord, after: MemoryRecord) -> None:
        if after is before:
            return
        for field in ("importance", "anchor_strength"):
            old_value, new_value = getattr(before, field), getattr(after, field)
            if old_value != new_value:
                self.modified.append(FieldChange(record_id=before.id, field=field, old=old_value, new=new_value))
        self.updated[before.id] = after

    def absorb(self, outcome: ResolutionOutcome) -> None:
        self.fallbacks.extend(outcome.fallbacks)
        if outcome.merge_failed:
            self.merge_failed = True
            return
        self.modified.extend(outcome.modified)
        self.merged_content = outcome.merged_content
        self.removed.extend(outcome.removed)

    def outcome(self, candidates: Sequence[MemoryRecord]) -> ResolutionOutcome:
        kept = [record.id for record in candidates if record.id not in self.removed]
        if self.new is not None:
            kept.append(self.new.id)
        return ResolutionOutcome(
            kept=kept,
            modified=self.modified,
            merged_content=self.merged_content,
            applied=self.applied,
            fallbacks=self.fallbacks,
            updated={record_id: record for record_id, record in self.updated.items() if record_id not in self.removed},
            removed=self.removed,
            inserted=self.new,
            absorbed_into=self.absorbed_into,
            merge_failed=self.merge_failed,
        )


async def resolve(
    new: MemoryRecord,
    candidates: Sequence[MemoryRecord],
    classifier: RelationOracle,
    merger: MergeOracle,
    now: Timestamp,
    cfg: EngineConfig,
    embedder: EmbeddingProvider | None = None,
) -> ResolutionOutcome:
    """
    Resolves a new memory against its conflict candidates.

    Candidates are processed in the given order (similarity descending). Each pair (new, candidate) is
    classified and the matching strategy applied: compatible -> redundancy penalty on the candidate,
    contradictory -> suppression of the candidate, subsumes -> the new memory absorbs the candidate,
    subsumed -> the candidate absorbs the new memory, which is then not inserted and processing stops.
    A classifier failure is treated as compatible and noted in `fallbacks`.

    Args:
        new (MemoryRecord): The incoming memory.
        candidates (Sequence[MemoryRecord]): Output of `find_conflict_candidates`.
        classifier (RelationOracle): Relation oracle.
        merger (MergeOracle): Merge oracle for subsumption.
        now (Timestamp): Resolution time.
        cfg (EngineConfig): Engine parameters.
        embedder (EmbeddingProvider | None): Re-embeds merged content.

    Returns:
        ResolutionOutcome: Records to update, ids to remove and the record to insert, if any.
    """
    state = _Resolution(new)
    for candidate in candidates:
        current_new = state.new
        if current_new is None:
            break
        existing = state.updated.get(candidate.id, candidate)
        sim = max(0.0, float(similarity_scores(current_new.embedding, [existing.embedding])[0]))
        try:
            relation = (await classifier.classify(current_new.content, existing.content)).relation
        except OracleError as error:
            logger.warning("Classifier failed on (%s, %s), treating as compatible: %s", new.id, existing.id, error)
            state.fallbacks.append(f"{existing.id}: classifier failed ({error}); treated as compatible")
            relation = Relation.COMPATIBLE
        state.applied[existing.id] = relation
        if relation is Relation.COMPATIBLE:
            state.update(existing, resolve_compatible(existing, sim, cfg))
        elif relation is Relation.CONTRADICTORY:
            state.update(existing, resolve_contradictory(existing, current_new.created_at, now, cfg))
        elif relation is Relation.SUBSUMES:
            outcome = await resolve_subsumption(current_new, existing, merger, now, cfg, embedder)
            state.absorb(outcome)
            state.new = outcome.updated.get(current_new.id, current_new)
        else:
            outcome = await resolve_subsumption(existing, current_new, merger, now, cfg, embedder)
            state.absorb(outcome.model_copy(update={"removed": []}))
            if not outcome.merge_failed:
                state.updated[existing.id] = outcome.updated[existing.id]
                state.absorbed_into = existing.id
                state.new = None
    return state.outcome(candidates)
