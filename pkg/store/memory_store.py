"""
This module implements the memory store and its evolution pipeline.

An observation runs, in order: decay (importance refresh, layer transitions, pruning), insertion of the
new memory followed by conflict resolution, one fusion pass, a final pruning sweep and capacity
enforcement. Queries rank by similarity times strength and consolidate what they return.

Classes:
    ScoredRecord: One ranked retrieval result.
    ObserveResult: What one observation did.
    StoreView: Immutable snapshot of the records handed to readers.
    StoreStats: Per-layer counts, strength histogram and storage reduction so far.
    MemoryStore: The store; mutating operations are serialized by an asyncio.Lock.

Functions:
    replay_operations(store, events) -> MemoryStore:
        Re-executes the operation entries of an event log on a store.
"""
import asyncio
import logging
from collections.abc import Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict

from conflict.conflict_models import ResolutionOutcome
from conflict.conflict_resolver import find_conflict_candidates, resolve
from core.config import EngineConfig, validate_config
from core.exceptions import ClockRegressionError, EmbeddingDimensionError
from core.ids import SequentialIds
from core.models import Embedding, Layer, MemoryRecord, Timestamp
from dynamics.context_window import ContextWindow
from dynamics.memory_dynamics import (
    assign_layer,
    consolidate,
    prune_eligible,
    refresh_importance,
    relevance_scores,
    strength_at,
)
from embedding.embedding_provider import DeterministicEmbedder, EmbeddingProvider, as_vector
from fusion.fusion_manager import FusedRecord, Rejection, run_fusion_pass
from oracles.oracle_protocols import MergeOracle, PreservationOracle, RelationOracle
from oracles.rule_oracle import RuleOracle
from store.event_log import EventKind, EventLog, StoreEvent

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 10


class ScoredRecord(BaseModel):
    """A retrieval result: the record (after consolidation for `query`), its score and strength at query time."""

    model_config = ConfigDict(frozen=True)

    record: MemoryRecord
    score: float
    strength: float


class ObserveResult(BaseModel):
    """
    Outcome of one observation.

    Attributes:
        record_id (str): Id of the record now holding the observation: the inserted record,
            the record that absorbed it, or the fused record that replaced it.
        inserted (bool): False when an existing memory absorbed the observation.
        resolution (ResolutionOutcome | None): None when conflict resolution is disabled.
        fusions (list[FusedRecord | Rejection]): Results of the fusion pass.
        pruned (list[str]): Ids removed by either pruning sweep.
        evicted (list[str]): Ids removed by capacity enforcement.
    """

    model_config = ConfigDict(frozen=True)

    record_id: str
    inserted: bool
    resolution: ResolutionOutcome | None = None
    fusions: list[FusedRecord | Rejection] = []
    pruned: list[str] = []
    evicted: list[str] = []


class StoreView(BaseModel):
    """Immutable snapshot of the store for readers."""

    model_config = ConfigDict(frozen=True)

    records: tuple[MemoryRecord, ...]
    clock: Timestamp
    context: ContextWindow


class StoreStats(BaseModel):
    """Summary statistics of a store at its clock."""

    model_config = ConfigDict(frozen=True)

    clock: Timestamp
    total: int
    per_layer: dict[str, int]
    fused: int
    observed: int
    srr: float
    strength_histogram: list[int]
    histogram_edges: list[float]


class MemoryStore:
    """
    Dual-layer memory store.

    Args:
        config (EngineConfig | None): Engine parameters, validated on construction; defaults when None.
        embedder (EmbeddingProvider | None): Defaults to the deterministic embedder.
        classifier (RelationOracle | None): Defaults to the rule oracle.
        merger (MergeOracle | None): Defaults to the rule oracle.
        verifier (PreservationOracle | None): Defaults to the rule oracle.
    """

    def __init__(
        self,
        config: EngineConfig | None = None,
        embedder: EmbeddingProvider | None = None,
        classifier: RelationOracle | None = None,
        merger: MergeOracle | None = None,
        verifier: PreservationOracle | None = None,
    ) -> None:
        self.config = validate_config(config or EngineConfig())
        rule_oracle = RuleOracle()
        self.embedder: EmbeddingProvider = embedder or DeterministicEmbedder()
        self.classifier: RelationOracle = classifier or rule_oracle
        self.merger: MergeOracle = merger or rule_oracle
        self.verifier: PreservationOracle = verifier or rule_oracle
        self.clock: Timestamp = 0.0
        self.context = ContextWindow(max_len=self.config.context_window_len)
        self.event_log = EventLog()
        self.ids = SequentialIds()
        self._records: dict[str, MemoryRecord] = {}
        self._vectors: dict[str, tuple[Embedding, np.ndarray]] = {}
        self._lock = asyncio.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, record_id: object) -> bool:
        return record_id in self._records

    @property
    def records(self) -> tuple[MemoryRecord, ...]:
        return tuple(self._records.values())

    @property
    def observed_count(self) -> int:
        """Number of observe operations so far."""
        return self.event_log.count(EventKind.OBSERVE)

    def get(self, record_id: str) -> MemoryRecord | None:
        return self._records.get(record_id)

    def view(self) -> StoreView:
        return StoreView(records=self.records, clock=self.clock, context=self.context)

    def restore(
        self,
        records: Iterable[MemoryRecord],
        clock: Timestamp,
        context: ContextWindow,
        events: Iterable[StoreEvent],
        next_id: int,
    ) -> None:
        """Replaces the whole state; used by snapshot loading."""
        self._records = {record.id: record for record in records}
        self._vectors = {}
        self.clock = clock
        self.context = context
        self.event_log = EventLog(list(events))
        self.ids = SequentialIds(next_id)

    async def observe(self, text: str, now: Timestamp, category_label: str | None = None) -> ObserveResult:
        """
        Ingests one observation through the full pipeline.

        Args:
            text (str): Memory content.
            now (Timestamp): Observation time, not earlier than the store clock.
            category_label (str | None): Optional tag carried by the new record.

        Returns:
            ObserveResult: Where the observation ended up and what the pipeline changed.

        Raises:
            ClockRegressionError: If `now` precedes the store clock.
            EmbeddingError: If the text cannot be embedded; the store is left unchanged.
        """
        async with self._lock:
            self._check_clock(now)
            embedding = await self.embedder.embed(text)
            self.event_log.append(now, EventKind.OBSERVE, text=text, category_label=category_label)
            pruned = self._decay(now)
            new_record = self._new_record(text, embedding, now, category_label)
            resolution = None
            if self.config.conflict_resolution:
                resolution = await self._resolve(new_record, now)
                record_id = resolution.absorbed_into or new_record.id
            else:
                self._insert(new_record, now)
                record_id = new_record.id
            fusions = await self._fuse(now) if self.config.fusion else []
            for fusion in fusions:
                if isinstance(fusion, FusedRecord) and record_id in fusion.replaced_ids:
                    record_id = fusion.record.id
            pruned.extend(self._prune(now))
            evicted = self._enforce_capacities(now)
            self.clock = now
        return ObserveResult(
            record_id=record_id,
            inserted=resolution is None or resolution.inserted is not None,
            resolution=resolution,
            fusions=fusions,
            pruned=pruned,
            evicted=evicted,
        )

    async def query(self, text: str, k: int, now: Timestamp) -> list[ScoredRecord]:
        """
        Top-k retrieval with consolidation.

        Every returned record is consolidated (counts as an access) and the query embedding enters the
        context window; nothing else changes.

        Args:
            text (str): Query text.
            k (int): Number of results, at least 1.
            now (Timestamp): Query time, not earlier than the store clock.

        Returns:
            list[ScoredRecord]: Best first; score = similarity * strength, ties by newer created_at.

        Raises:
            ValueError: If k < 1.
            ClockRegressionError: If `now` precedes the store clock.
        """
        if k < 1:
            raise ValueError("k must be at least 1")
        async with self._lock:
            self._check_clock(now)
            query_embedding = await self.embedder.embed(text)
            self.event_log.append(now, EventKind.QUERY, text=text, k=k)
            ranked = self._rank(query_embedding, k, now)
            results = []
            for scored in ranked:
                reinforced = consolidate(scored.record, now, self.config)
                self._records[reinforced.id] = reinforced
                results.append(scored.model_copy(update={"record": reinforced}))
            self.context = self.context.push(query_embedding)
            self.clock = max(self.clock, now)
        return results

    async def peek(self, text: str, k: int, now: Timestamp | None = None) -> list[ScoredRecord]:
        """Read-only ranking: same scores as `query`, without consolidation, context update or logging."""
        if k < 1:
            raise ValueError("k must be at least 1")
        at = self.clock if now is None else now
        async with self._lock:
            self._check_clock(at)
            query_embedding = await self.embedder.embed(text)
            return self._rank(query_embedding, k, at)

    async def tick(self, now: Timestamp) -> list[str]:
        """
        Advances the clock: decay, layer transitions, pruning and capacity enforcement, no insertion or fusion.

        Returns:
            list[str]: Ids removed by pruning or eviction.

        Raises:
            ClockRegressionError: If `now` precedes the store clock.
        """
        async with self._lock:
            self._check_clock(now)
            self.event_log.append(now, EventKind.TICK)
            removed = self._decay(now)
            removed.extend(self._enforce_capacities(now))
            self.clock = now
        return removed

    def stats(self) -> StoreStats:
        strengths = [strength_at(record, self.clock, self.config) for record in self._records.values()]
        histogram, edges = np.histogram(strengths, bins=HISTOGRAM_BINS, range=(0, 1))
        observed = self.observed_count
        return StoreStats(
            clock=self.clock,
            total=len(self._records),
            per_layer={
                layer.value: sum(1 for record in self._records.values() if record.layer is layer)
                for layer in Layer
            },
            fused=sum(1 for record in self._records.values() if record.fused),
            observed=observed,
            srr=1 - len(self._records) / observed if observed else 0.0,
            strength_histogram=[int(count) for count in histogram],
            histogram_edges=[float(edge) for edge in edges],
        )

    def _check_clock(self, now: Timestamp) -> None:
        if now < self.clock:
            raise ClockRegressionError(now, self.clock)

    def _new_record(
        self,
        text: str,
        embedding: tuple[float, ...],
        now: Timestamp,
        category_label: str | None,
    ) -> MemoryRecord:
        record = MemoryRecord(
            id=self.ids.take(),
            content=text,
            embedding=embedding,
            anchor_strength=1.0,
            anchor_time=now,
            created_at=now,
            category_label=category_label,
        )
        record = refresh_importance(record, self.context, now, self.config)
        return record.model_copy(update={"layer": assign_layer(record, self.config)})

    def _insert(self, record: MemoryRecord, now: Timestamp) -> None:
        self._records[record.id] = record
        self.event_log.append(now, EventKind.INSERT, id=record.id, layer=record.layer.value)

    def _remove(self, record_id: str, now: Timestamp, kind: EventKind, **details: str) -> None:
        removed = self._records.pop(record_id)
        self._vectors.pop(record_id, None)
        logger.debug("%s %s (layer %s)", kind.value, record_id, removed.layer)
        self.event_log.append(now, kind, id=record_id, **details)

    def _vector_matrix(self, records: tuple[MemoryRecord, ...]) -> np.ndarray:
        """(n, dim) matrix of the records' embeddings; rows are cached per id until the embedding changes."""
        rows = []
        for record in records:
            cached = self._vectors.get(record.id)
            if cached is None or cached[0] is not record.embedding:
                cached = (record.embedding, as_vector(record.embedding))
                self._vectors[record.id] = cached
            rows.append(cached[1])
        if len({row.shape[0] for row in rows}) > 1:
            raise EmbeddingDimensionError("stored embeddings have mixed dimensions")
        return np.stack(rows)

    def _decay(self, now: Timestamp) -> list[str]:
        records = self.records
        if not records:
            return []
        relevances = relevance_scores(self._vector_matrix(records), self.context).tolist()
        for record, rel in zip(records, relevances, strict=True):
            record_id = record.id
            refreshed = refresh_importance(record, self.context, now, self.config, rel)
            layer = assign_layer(refreshed, self.config)
            if layer is not record.layer:
                self.event_log.append(now, EventKind.LAYER, id=record_id, old=record.layer.value, new=layer.value)
                refreshed = refreshed.model_copy(update={"layer": layer})
            self._records[record_id] = refreshed
        return self._prune(now)

    def _prune(self, now: Timestamp) -> list[str]:
        doomed = [record.id for record in self._records.values() if prune_eligible(record, now, self.config)]
        for record_id in doomed:
            self._remove(record_id, now, EventKind.PRUNE)
        if doomed:
            logger.info("Pruned %d memories at t=%.3f", len(doomed), now)
        return doomed

    async def _resolve(self, new_record: MemoryRecord, now: Timestamp) -> ResolutionOutcome:
        candidates = find_conflict_candidates(new_record, self.records, self.config)
        outcome = await resolve(
            new_record, candidates, self.classifier, self.merger, now, self.config, self.embedder,
        )
        for record_id in outcome.removed:
            self._remove(record_id, now, EventKind.MERGE, into=new_record.id)
        for record_id, record in outcome.updated.items():
            self._records[record_id] = record
            self.event_log.append(now, EventKind.UPDATE, id=record_id, relation=outcome.applied[record_id].value)
        if outcome.inserted is not None:
            self._insert(outcome.inserted, now)
        elif outcome.absorbed_into is not None:
            logger.info("Observation %s absorbed into %s", new_record.id, outcome.absorbed_into)
            self.event_log.append(now, EventKind.MERGE, id=new_record.id, into=outcome.absorbed_into)
        return outcome

    async def _fuse(self, now: Timestamp) -> list[FusedRecord | Rejection]:
        results = await run_fusion_pass(
            self.records, self.merger, self.verifier, now, self.config, self.context, self.embedder, self.ids,
        )
        for result in results:
            if isinstance(result, FusedRecord):
                for record_id in result.replaced_ids:
                    self._remove(record_id, now, EventKind.FUSE, into=result.record.id)
                self._insert(result.record, now)
        return results

    def _enforce_capacities(self, now: Timestamp) -> list[str]:
        if self.config.dual_layer:
            groups = [
                ([record for record in self._records.values() if record.layer is Layer.LML], self.config.cap_lml),
                ([record for record in self._records.values() if record.layer is Layer.SML], self.config.cap_sml),
            ]
        else:
            groups = [(list(self._records.values()), self.config.cap_lml + self.config.cap_sml)]
        evicted = []
        for members, capacity in groups:
            excess = len(members) - capacity
            if excess <= 0:
                continue
            members.sort(key=lambda record: (strength_at(record, now, self.config), record.created_at, record.id))
            for record in members[:excess]:
                self._remove(record.id, now, EventKind.EVICT, layer=record.layer.value)
                evicted.append(record.id)
            logger.info("Evicted %d memories over capacity %d", excess, capacity)
        return evicted

    def _rank(self, query_embedding: tuple[float, ...], k: int, now: Timestamp) -> list[ScoredRecord]:
        records = self.records
        if not records:
            return []
        matrix = self._vector_matrix(records)
        if matrix.shape[1] != len(query_embedding):
            raise EmbeddingDimensionError(f"dimension mismatch: {len(query_embedding)} != {matrix.shape[1]}")
        similarities = np.clip(matrix @ as_vector(query_embedding), -1, 1)
        strengths = np.array([strength_at(record, now, self.config) for record in records], dtype=np.float64)
        scores = (similarities * strengths).tolist()
        top = sorted(
            range(len(records)),
            key=lambda index: (-scores[index], -records[index].created_at, records[index].id),
        )[:k]
        # records are already validated; skip re-running their invariants
        return [
            ScoredRecord.model_construct(record=records[index], score=scores[index], strength=float(strengths[index]))
            for index in top
        ]


async def replay_operations(store: MemoryStore, events: Iterable[StoreEvent]) -> MemoryStore:
    """
    Re-executes the operation entries (observe, query, tick) of an event log on `store`.

    Audit entries are skipped; the store regenerates them. With deterministic oracles the result equals
    the store that produced the log.

    Returns:
        MemoryStore: `store`, after replay.
    """
    for event in events:
        if event.kind is EventKind.OBSERVE:
            await store.observe(event.payload["text"], event.at, event.payload.get("category_label"))
        elif event.kind is EventKind.QUERY:
            await store.query(event.payload["text"], int(event.payload["k"]), event.at)
        elif event.kind is EventKind.TICK:
            await store.tick(event.at)
    return store
