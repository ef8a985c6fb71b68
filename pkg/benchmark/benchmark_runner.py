"""
This module replays traces through the memory store, or through a FIFO baseline, and scores the runs.

Classes:
    RetrievedItem: One ranked result as the scorer sees it.
    BenchmarkRun: A scored run and the store it left behind.
    FifoWindow: Keeps the most recent observations and ranks them by cosine similarity alone.

Functions:
    run_benchmark(trace, cfg, ...) -> BenchmarkRun:
        Replays a trace through a MemoryStore and computes every metric.

    run_fifo_baseline(trace, budget, ...) -> MetricsReport:
        Same trace and retention checks against a FIFO window holding `budget` observations.

    run_ablation(trace, cfg, ...) -> dict[str, MetricsReport]:
        The full engine and one run per disabled component.
"""
import logging
from collections import deque
from collections.abc import Sequence
from typing import Protocol

from pydantic import BaseModel, ConfigDict

from benchmark.metrics import (
    MetricsReport,
    asserted_value,
    compute_rp_at_k,
    compute_srr,
    compute_tcs,
    macro_average,
    recount_rp_at_k,
    recount_srr,
    recount_tcs,
)
from benchmark.trace_models import Category, ConflictType, EventType, TraceEvent, validate_trace
from conflict.conflict_models import strategy_for
from core.config import EngineConfig
from core.exceptions import TraceError
from core.models import Embedding, Layer, Timestamp
from embedding.embedding_provider import DeterministicEmbedder, EmbeddingProvider, similarity_scores
from oracles.oracle_protocols import MergeOracle, PreservationOracle, RelationOracle
from store.event_log import EventKind
from store.memory_store import MemoryStore, ObserveResult

logger = logging.getLogger(__name__)

DEFAULT_K_VALUES = (5, 10)
DEFAULT_QUERY_K = 5
DEFAULT_RETENTION_K = 5
AGREEMENT_TOLERANCE = 1e-12
ABLATIONS = {
    "no_dual_layer": "dual_layer",
    "no_conflict_resolution": "conflict_resolution",
    "no_fusion": "fusion",
}


class RetrievedItem(BaseModel):
    model_config = ConfigDict(frozen=True)

    record_id: str
    content: str
    created_at: Timestamp


class BenchmarkRun(BaseModel):
    """Report of a run and the store that produced it."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    report: MetricsReport
    store: MemoryStore


class _Subject(Protocol):
    """What the scorer needs from the system under test."""

    async def observe(self, event: TraceEvent) -> str:
        ...  # noqa: WPS428

    async def query(self, event: TraceEvent, k: int) -> None:
        ...  # noqa: WPS428

    async def peek(self, text: str, k: int, now: Timestamp) -> list[RetrievedItem]:
        ...  # noqa: WPS428

    async def advance(self, now: Timestamp) -> None:
        ...  # noqa: WPS428

    def current_id(self, record_id: str) -> str | None:
        ...  # noqa: WPS428

    def applied_strategy(self, target_record_id: str) -> str | None:
        ...  # noqa: WPS428


class _StoreSubject:
    """Adapts a MemoryStore; follows merge and fusion lineage so old ids map to the records holding them."""

    def __init__(self, store: MemoryStore) -> None:
        self.store = store
        self._successors: dict[str, str] = {}
        self._log_position = 0
        self._last_result: ObserveResult | None = None

    async def observe(self, event: TraceEvent) -> str:
        category = event.labels.category.value if event.labels.category else None
        self._last_result = await self.store.observe(event.text, event.at, category)
        self._follow_log()
        return self._last_result.record_id

    async def query(self, event: TraceEvent, k: int) -> None:
        await self.store.query(event.text, k, event.at)

    async def peek(self, text: str, k: int, now: Timestamp) -> list[RetrievedItem]:
        return [
            RetrievedItem(record_id=scored.record.id, content=scored.record.content, created_at=scored.record.created_at)
            for scored in await self.store.peek(text, k, now)
        ]

    async def advance(self, now: Timestamp) -> None:
        await self.store.tick(now)

    def current_id(self, record_id: str) -> str | None:
        while record_id not in self.store:
            successor = self._successors.get(record_id)
            if successor is None:
                return None
            record_id = successor
        return record_id

    def applied_strategy(self, target_record_id: str) -> str | None:
        if self._last_result is None or self._last_result.resolution is None:
            return None
        relation = self._last_result.resolution.applied.get(target_record_id)
        return strategy_for(relation) if relation is not None else None

    def _follow_log(self) -> None:
        events = self.store.event_log.events()
        for event in events[self._log_position:]:
            if event.kind in {EventKind.MERGE, EventKind.FUSE}:
                self._successors[event.payload["id"]] = event.payload["into"]
        self._log_position = len(events)


class FifoWindow:
    """Most recent `budget` observations, ranked by cosine similarity, newer first on ties."""

    def __init__(self, budget: int, embedder: EmbeddingProvider) -> None:
        self._entries: deque[tuple[RetrievedItem, Embedding]] = deque(maxlen=max(0, budget))
        self._embedder = embedder
        self.observed = 0

    def __len__(self) -> int:
        return len(self._entries)

    async def observe(self, event: TraceEvent) -> str:
        embedding = await self._embedder.embed(event.text)
        self._entries.append((RetrievedItem(record_id=event.event_id, content=event.text, created_at=event.at), embedding))
        self.observed += 1
        return event.event_id

    async def query(self, event: TraceEvent, k: int) -> None:
        """Retrieval does not change a FIFO window."""

    async def peek(self, text: str, k: int, now: Timestamp) -> list[RetrievedItem]:
        query_embedding = await self._embedder.embed(text)
        entries = list(self._entries)
        scores = similarity_scores(query_embedding, [embedding for _, embedding in entries])
        ranked = sorted(
            zip(scores, (item for item, _ in entries), strict=True),
            key=lambda scored: (-scored[0], -scored[1].created_at, scored[1].record_id),
        )
        return [item for _, item in ranked[:k]]

    async def advance(self, now: Timestamp) -> None:
        """A FIFO window has no time dynamics."""

    def current_id(self, record_id: str) -> str | None:
        return record_id if any(item.record_id == record_id for item, _ in self._entries) else None

    def applied_strategy(self, target_record_id: str) -> str | None:
        return None


class _Scorer:
    """Accumulates per-event observations of a run."""

    def __init__(self, k_values: Sequence[int], query_k: int) -> None:
        self.k_values = tuple(k_values)
        self.query_k = query_k
        self.records_by_event: dict[str, str] = {}
        self.conflict_types: dict[str, ConflictType] = {}
        self.strategy_hits: dict[ConflictType, list[bool]] = {conflict_type: [] for conflict_type in ConflictType}
        self.strategy_selected = False
        self.consistency_hits: dict[ConflictType, list[bool]] = {conflict_type: [] for conflict_type in ConflictType}
        self.rankings: list[tuple[list[str], set[str], list[Timestamp]]] = []
        self.queries = 0

    async def replay(self, subject: _Subject, trace: Sequence[TraceEvent]) -> None:
        for event in trace:
            if event.kind is EventType.OBSERVE:
                await self._observe(subject, event)
            elif event.kind is EventType.QUERY:
                await self._query(subject, event)
            else:
                await subject.advance(event.at)

    async def _observe(self, subject: _Subject, event: TraceEvent) -> None:
        conflict = event.labels.conflict
        target = None
        if conflict is not None:
            self.conflict_types[event.event_id] = conflict.type
            target_record = self.records_by_event.get(conflict.target_id)
            target = subject.current_id(target_record) if target_record else None
        self.records_by_event[event.event_id] = await subject.observe(event)
        if conflict is not None:
            applied = subject.applied_strategy(target) if target else None
            self.strategy_selected = self.strategy_selected or applied is not None
            self.strategy_hits[conflict.type].append(applied == conflict.correct_strategy)

    async def _query(self, subject: _Subject, event: TraceEvent) -> None:
        self.queries += 1
        retrieved = await subject.peek(event.text, max((*self.k_values, self.query_k)), event.at)
        if event.labels.relevant_ids:
            relevant = set()
            for event_id in event.labels.relevant_ids:
                current = subject.current_id(self.records_by_event[event_id])
                if current is not None:
                    relevant.add(current)
            self.rankings.append((
                [item.record_id for item in retrieved],
                relevant,
                [item.created_at for item in retrieved],
            ))
        if event.labels.conflict_ref is not None and event.fact_key is not None:
            conflict_type = self.conflict_types[event.labels.conflict_ref]
            self.consistency_hits[conflict_type].append(_consistent(retrieved[:self.query_k], event))
        await subject.query(event, event.k or self.query_k)

    def rp_at_k(self) -> dict[int, float]:
        if not self.rankings:
            return {k: 0.0 for k in self.k_values}
        return {
            k: sum(compute_rp_at_k(ids, relevant, k) for ids, relevant, _ in self.rankings) / len(self.rankings)
            for k in self.k_values
        }

    def tcs(self) -> float:
        if not self.rankings:
            return 1.0
        return sum(compute_tcs(times) for _, _, times in self.rankings) / len(self.rankings)

    def agreement(self, rp_at_k: dict[int, float], tcs: float) -> dict[str, bool]:
        recounted_rp = {
            k: (
                sum(recount_rp_at_k(ids, relevant, k) for ids, relevant, _ in self.rankings) / len(self.rankings)
                if self.rankings else 0.0
            )
            for k in self.k_values
        }
        recounted_tcs = (
            sum(recount_tcs(times) for _, _, times in self.rankings) / len(self.rankings) if self.rankings else 1.0
        )
        return {
            "rp_at_k": all(abs(recounted_rp[k] - rp_at_k[k]) <= AGREEMENT_TOLERANCE for k in self.k_values),
            "tcs": abs(recounted_tcs - tcs) <= AGREEMENT_TOLERANCE,
        }


def _consistent(retrieved: Sequence[RetrievedItem], event: TraceEvent) -> bool:
    for item in retrieved:
        value = asserted_value(item.content, event.fact_key or "")
        if value is not None:
            return value == (event.value or "").lower()
    return False


def _share(hits: Sequence[bool]) -> float | None:
    return sum(hits) / len(hits) if hits else None


async def _retention(
    subject: _Subject,
    trace: Sequence[TraceEvent],
    now: Timestamp,
    retention_k: int,
) -> dict[Category, float]:
    """Share of labelled facts whose content appears in the top results of their canonical query."""
    checks: dict[Category, dict[str, tuple[str, str]]] = {category: {} for category in Category}
    for event in trace:
        if event.kind is not EventType.OBSERVE or event.labels.canonical_query is None:
            continue
        if event.labels.category is Category.CRITICAL and event.fact_text is not None and event.fact_key is not None:
            checks[Category.CRITICAL][event.fact_key] = (event.labels.canonical_query, event.fact_text)
        elif event.labels.category is Category.CONTEXTUAL:
            checks[Category.CONTEXTUAL][event.event_id] = (event.labels.canonical_query, event.text)
    retention = {}
    for category, category_checks in checks.items():
        hits = []
        for query_text, needle in category_checks.values():
            retrieved = await subject.peek(query_text, retention_k, now)
            hits.append(any(needle in item.content for item in retrieved))
        retention[category] = sum(hits) / len(hits) if hits else 0.0
    return retention


def _horizon(trace: Sequence[TraceEvent], horizon: Timestamp | None) -> Timestamp:
    last_event = trace[-1].at if trace else 0.0
    return last_event if horizon is None else max(horizon, last_event)


def _check_inputs(trace: Sequence[TraceEvent], k_values: Sequence[int], query_k: int, retention_k: int) -> None:
    if not trace:
        raise TraceError("trace is empty")
    if not k_values or min((*k_values, query_k, retention_k)) < 1:
        raise TraceError("k values must be positive")
    validate_trace(trace)


def _promotion_rate(store: MemoryStore) -> float:
    started_in_sml = set()
    promoted = set()
    for event in store.event_log:
        if event.kind is EventKind.INSERT and event.payload.get("layer") == Layer.SML.value:
            started_in_sml.add(event.payload["id"])
        elif event.kind is EventKind.LAYER and event.payload.get("new") == Layer.LML.value:
            promoted.add(event.payload["id"])
    return len(promoted & started_in_sml) / len(started_in_sml) if started_in_sml else 0.0


def _report(  # noqa: WPS211
    label: str,
    scorer: _Scorer,
    retention: dict[Category, float],
    retained: int,
    observed: int,
    counts: dict[str, int],
    promotion_rate: float,
    srr_agrees: bool,
) -> MetricsReport:
    rp_at_k = scorer.rp_at_k()
    tcs = scorer.tcs()
    accuracy = {
        conflict_type.value: _share(hits) if scorer.strategy_selected else None
        for conflict_type, hits in scorer.strategy_hits.items()
    }
    consistency = {conflict_type.value: _share(hits) for conflict_type, hits in scorer.consistency_hits.items()}
    conflict_counts = {f"conflicts_{kind.value}": len(hits) for kind, hits in scorer.strategy_hits.items()}
    return MetricsReport(
        label=label,
        srr=compute_srr(retained, observed),
        rp_at_k=rp_at_k,
        tcs=tcs,
        retention_critical=retention[Category.CRITICAL],
        retention_contextual=retention[Category.CONTEXTUAL],
        conflict_accuracy=accuracy,
        conflict_consistency=consistency,
        conflict_accuracy_macro=macro_average(accuracy.values()),
        conflict_consistency_macro=macro_average(consistency.values()),
        promotion_rate=promotion_rate,
        counts={
            "observed": observed,
            "retained": retained,
            "queries": scorer.queries,
            "conflicts": sum(conflict_counts.values()),
            **conflict_counts,
            **counts,
        },
        oracle_agreement={"srr": srr_agrees, **scorer.agreement(rp_at_k, tcs)},
    )


async def run_benchmark(  # noqa: WPS211
    trace: Sequence[TraceEvent],
    cfg: EngineConfig | None = None,
    classifier: RelationOracle | None = None,
    merger: MergeOracle | None = None,
    verifier: PreservationOracle | None = None,
    embedder: EmbeddingProvider | None = None,
    k_values: Sequence[int] = DEFAULT_K_VALUES,
    horizon: Timestamp | None = None,
    query_k: int = DEFAULT_QUERY_K,
    retention_k: int = DEFAULT_RETENTION_K,
    label: str = "fademem",
) -> BenchmarkRun:
    """
    Replays a trace through a fresh store on the virtual clock and scores it.

    Every query is first ranked read-only for RP@K, TCS and post-conflict consistency, then issued as a real
    query (consolidating its results). After the last event the store is advanced to `horizon` and every
    labelled fact is queried with its canonical query.

    Args:
        trace (Sequence[TraceEvent]): Valid trace.
        cfg (EngineConfig | None): Store configuration.
        classifier (RelationOracle | None): Relation oracle; the rule oracle when None.
        merger (MergeOracle | None): Merge oracle; the rule oracle when None.
        verifier (PreservationOracle | None): Preservation oracle; the rule oracle when None.
        embedder (EmbeddingProvider | None): Embedder; the deterministic embedder when None.
        k_values (Sequence[int]): Cut-offs for RP@K.
        horizon (Timestamp | None): Scoring time; the last event's time when None.
        query_k (int): k of the mutating queries and of the consistency check.
        retention_k (int): k of the retention checks.
        label (str): Run name in the report.

    Returns:
        BenchmarkRun: Report and final store.

    Raises:
        TraceError: If the trace is empty or invalid, or a k value is below 1.
    """
    _check_inputs(trace, k_values, query_k, retention_k)
    store = MemoryStore(cfg, embedder=embedder, classifier=classifier, merger=merger, verifier=verifier)
    subject = _StoreSubject(store)
    scorer = _Scorer(k_values, query_k)
    await scorer.replay(subject, trace)
    end = _horizon(trace, horizon)
    if end > store.clock:
        await subject.advance(end)
    retention = await _retention(subject, trace, end, retention_k)
    observed = store.observed_count
    srr = compute_srr(len(store), observed)
    recounted = recount_srr((event.kind.value for event in store.event_log.operations()), len(store))
    report = _report(
        label,
        scorer,
        retention,
        retained=len(store),
        observed=observed,
        counts={
            "fused": sum(1 for record in store.records if record.fused),
            "pruned": store.event_log.count(EventKind.PRUNE),
            "evicted": store.event_log.count(EventKind.EVICT),
            "merged": store.event_log.count(EventKind.MERGE),
            "lml": sum(1 for record in store.records if record.layer is Layer.LML),
        },
        promotion_rate=_promotion_rate(store),
        srr_agrees=abs(recounted - srr) <= AGREEMENT_TOLERANCE,
    )
    logger.info("Run %s: srr=%.3f retention critical=%.3f", label, report.srr, report.retention_critical)
    return BenchmarkRun(report=report, store=store)


async def run_fifo_baseline(  # noqa: WPS211
    trace: Sequence[TraceEvent],
    budget: int,
    embedder: EmbeddingProvider | None = None,
    k_values: Sequence[int] = DEFAULT_K_VALUES,
    horizon: Timestamp | None = None,
    query_k: int = DEFAULT_QUERY_K,
    retention_k: int = DEFAULT_RETENTION_K,
) -> MetricsReport:
    """
    Scores a FIFO window keeping the `budget` most recent observations, with pure cosine retrieval.

    The window selects no conflict strategies, so its conflict accuracy is None for every type.
    """
    _check_inputs(trace, k_values, query_k, retention_k)
    window = FifoWindow(budget, embedder or DeterministicEmbedder())
    scorer = _Scorer(k_values, query_k)
    await scorer.replay(window, trace)
    retention = await _retention(window, trace, _horizon(trace, horizon), retention_k)
    srr = compute_srr(len(window), window.observed)
    operation_kinds = (event.kind.value for event in trace if event.kind is EventType.OBSERVE)
    return _report(
        "fifo",
        scorer,
        retention,
        retained=len(window),
        observed=window.observed,
        counts={"budget": budget},
        promotion_rate=0.0,
        srr_agrees=abs(recount_srr(operation_kinds, len(window)) - srr) <= AGREEMENT_TOLERANCE,
    )


async def run_ablation(  # noqa: WPS211
    trace: Sequence[TraceEvent],
    cfg: EngineConfig | None = None,
    classifier: RelationOracle | None = None,
    merger: MergeOracle | None = None,
    verifier: PreservationOracle | None = None,
    embedder: EmbeddingProvider | None = None,
    k_values: Sequence[int] = DEFAULT_K_VALUES,
    horizon: Timestamp | None = None,
) -> dict[str, MetricsReport]:
    """
    The full engine and one run per disabled component (dual layer, conflict resolution, fusion).

    Returns:
        dict[str, MetricsReport]: Reports keyed by run label, "fademem" first.
    """
    base = cfg or EngineConfig()
    variants = {"fademem": base}
    for label, switch in ABLATIONS.items():
        variants[label] = base.model_copy(update={switch: False})
    reports = {}
    for label, variant in variants.items():
        run = await run_benchmark(
            trace, variant, classifier, merger, verifier, embedder, k_values, horizon, label=label,
        )
        reports[label] = run.report
    return reports
