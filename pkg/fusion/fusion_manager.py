"""
This module clusters related memories in time and meaning and fuses each cluster into one record.

Classes:
    FusionCluster: Seed id, member ids and the creation-time window of a cluster.
    FusedRecord: An accepted fusion, the new record and the ids it replaces.
    Rejection: A refused fusion and its cause; the members stay untouched.

Functions:
    find_fusion_clusters(store_view, cfg) -> list[FusionCluster]:
        Greedy clustering, seeds in ascending creation order.

    fused_strength(member_strengths, eps_var) -> float:
        min(1, max + eps_var * population variance).

    fused_decay_scale(cluster_size) -> float:
        1 / (1 + ln(cluster_size)).

    fuse(cluster, members, merger, verifier, now, cfg, ctx, embedder, record_id) -> FusedRecord | Rejection:
        Merges, verifies and builds the fused record.

    run_fusion_pass(store_view, merger, verifier, now, cfg, ctx, embedder, ids) -> list[FusedRecord | Rejection]:
        One pass over every cluster of the view.
"""
import logging
import math
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from core.config import EngineConfig
from core.exceptions import EmbeddingError, OracleError
from core.ids import SequentialIds
from core.models import Layer, MemoryRecord, Timestamp
from dynamics.context_window import ContextWindow
from dynamics.memory_dynamics import refresh_importance, strength_at
from embedding.embedding_provider import EmbeddingProvider, embedding_matrix
from oracles.oracle_protocols import MergeOracle, PreservationOracle

logger = logging.getLogger(__name__)


class FusionCluster(BaseModel):
    """
    A temporal-semantic cluster around a seed memory.

    Attributes:
        seed_id (str): The seed record.
        member_ids (tuple[str, ...]): Members, seed included, in creation order.
        created_window (tuple[float, float]): (min, max) creation time of the members.
    """

    model_config = ConfigDict(frozen=True)

    seed_id: str
    member_ids: tuple[str, ...]
    created_window: tuple[Timestamp, Timestamp]


class FusedRecord(BaseModel):
    """Accepted fusion: `record` replaces every id in `replaced_ids`."""

    model_config = ConfigDict(frozen=True)

    record: MemoryRecord
    replaced_ids: tuple[str, ...]
    preservation: float


class Rejection(BaseModel):
    """Refused fusion; `preservation` is set when the verifier answered."""

    model_config = ConfigDict(frozen=True)

    cluster: FusionCluster
    cause: str
    preservation: float | None = None


def find_fusion_clusters(store_view: Sequence[MemoryRecord], cfg: EngineConfig) -> list[FusionCluster]:
    """
    Temporal-semantic clusters of the view.

    Seeds are visited by ascending (created_at, id). A seed's cluster holds every record not claimed by an
    earlier cluster whose similarity to the seed exceeds theta_fusion and whose creation time lies within
    t_window_days of the seed's. Clusters smaller than cluster_min_size are discarded and claim nothing.
    Fused records never join a cluster.

    Args:
        store_view (Sequence[MemoryRecord]): Current records.
        cfg (EngineConfig): Supplies theta_fusion, t_window_days and cluster_min_size.

    Returns:
        list[FusionCluster]: Disjoint clusters in seed order.
    """
    records = sorted((record for record in store_view if not record.fused), key=lambda rec: (rec.created_at, rec.id))
    if len(records) < cfg.cluster_min_size:
        return []
    matrix = embedding_matrix(record.embedding for record in records)
    similar = np.clip(matrix @ matrix.T, -1, 1) > cfg.theta_fusion
    np.fill_diagonal(similar, True)
    created = np.array([record.created_at for record in records])
    close_in_time = np.abs(created[:, None] - created[None, :]) < cfg.t_window_days
    eligible = similar & close_in_time
    claimed = np.zeros(len(records), dtype=bool)
    clusters = []
    for seed_index, seed in enumerate(records):
        if claimed[seed_index]:
            continue
        member_indices = np.flatnonzero(eligible[seed_index] & ~claimed)
        if member_indices.size < cfg.cluster_min_size:
            continue
        claimed[member_indices] = True
        members = [records[index] for index in member_indices]
        clusters.append(FusionCluster(
            seed_id=seed.id,
            member_ids=tuple(member.id for member in members),
            created_window=(members[0].created_at, max(member.created_at for member in members)),
        ))
    return clusters


def fused_strength(member_strengths: Sequence[float], eps_var: float) -> float:
    """
    Strength of a fused record: min(1, max + eps_var * population variance).

    Raises:
        ValueError: If `member_strengths` is empty.
    """
    if not member_strengths:
        raise ValueError("cannot fuse an empty list of strengths")
    strengths = np.asarray(member_strengths, dtype=np.float64)
    return float(min(1.0, strengths.max() + eps_var * strengths.var()))


def fused_decay_scale(cluster_size: int) -> float:
    """
    Decay multiplier of a fused record, 1 / (1 + ln(cluster_size)).

    Raises:
        ValueError: If `cluster_size` is below 1.
    """
    if cluster_size < 1:
        raise ValueError("cluster size must be positive")
    return 1 / (1 + math.log(cluster_size))


def _membership_error(cluster: FusionCluster, members: Sequence[MemoryRecord]) -> str | None:
    if sorted(member.id for member in members) != sorted(cluster.member_ids):
        return "cluster membership changed before fusion"
    if any(member.fused for member in members):
        return "fused records cannot be fused again"
    return None


async def fuse(  # noqa: WPS211
    cluster: FusionCluster,
    members: Sequence[MemoryRecord],
    merger: MergeOracle,
    verifier: PreservationOracle,
    now: Timestamp,
    cfg: EngineConfig,
    ctx: ContextWindow,
    embedder: EmbeddingProvider,
    record_id: str,
) -> FusedRecord | Rejection:
    """
    Fuses a cluster into a single record.

    Member contents are merged oldest first and the merge is scored by the verifier; a score below
    theta_preserve, or any oracle or embedding failure, rejects the fusion.

    Args:
        cluster (FusionCluster): The cluster to fuse.
        members (Sequence[MemoryRecord]): Current values of the cluster's members.
        merger (MergeOracle): Produces the fused content.
        verifier (PreservationOracle): Scores the fused content against the member contents.
        now (Timestamp): Fusion time, the new anchor time.
        cfg (EngineConfig): Engine parameters.
        ctx (ContextWindow): Context for the recomputed importance.
        embedder (EmbeddingProvider): Embeds the fused content.
        record_id (str): Id of the fused record.

    Returns:
        FusedRecord | Rejection: The fused record, or the reason the members are left as they are.
    """
    membership_error = _membership_error(cluster, members)
    if membership_error is not None:
        return Rejection(cluster=cluster, cause=membership_error)
    ordered = sorted(members, key=lambda member: (member.created_at, member.id))
    sources = [member.content for member in ordered]
    try:
        merged = await merger.merge(sources)
        preservation = await verifier.preservation_score(sources, merged)
    except (OracleError, ValueError) as error:
        return Rejection(cluster=cluster, cause=f"oracle failure: {error}")
    if preservation < cfg.theta_preserve:
        return Rejection(
            cluster=cluster,
            cause=f"preservation {preservation:.3f} below {cfg.theta_preserve}",
            preservation=preservation,
        )
    try:
        embedding = await embedder.embed(merged)
    except EmbeddingError as error:
        return Rejection(cluster=cluster, cause=f"embedding failure: {error}", preservation=preservation)
    labels = {member.category_label for member in ordered}
    layer = Layer.LML if cfg.dual_layer and any(member.layer is Layer.LML for member in ordered) else Layer.SML
    record = MemoryRecord(
        id=record_id,
        content=merged,
        embedding=embedding,
        anchor_strength=fused_strength([strength_at(member, now, cfg) for member in ordered], cfg.eps_var),
        anchor_time=now,
        created_at=ordered[0].created_at,
        access_times=tuple(sorted({access for member in ordered for access in member.access_times})),
        layer=layer,
        importance=0,
        decay_scale=fused_decay_scale(len(ordered)),
        category_label=labels.pop() if len(labels) == 1 else None,
        merged_ids=tuple(
            merged_id for member in ordered for merged_id in (member.id, *member.merged_ids)
        ),
        fused=True,
    )
    return FusedRecord(
        record=refresh_importance(record, ctx, now, cfg),
        replaced_ids=tuple(member.id for member in ordered),
        preservation=preservation,
    )


async def run_fusion_pass(  # noqa: WPS211
    store_view: Sequence[MemoryRecord],
    merger: MergeOracle,
    verifier: PreservationOracle,
    now: Timestamp,
    cfg: EngineConfig,
    ctx: ContextWindow,
    embedder: EmbeddingProvider,
    ids: SequentialIds,
) -> list[FusedRecord | Rejection]:
    """
    Fuses every cluster of the view, in seed order.

    Only accepted fusions consume an id from `ids`.

    Returns:
        list[FusedRecord | Rejection]: One result per cluster.
    """
    by_id = {record.id: record for record in store_view}
    results: list[FusedRecord | Rejection] = []
    for cluster in find_fusion_clusters(store_view, cfg):
        members = [by_id[member_id] for member_id in cluster.member_ids]
        result = await fuse(cluster, members, merger, verifier, now, cfg, ctx, embedder, ids.peek())
        if isinstance(result, FusedRecord):
            ids.take()
            logger.info("Fused %d memories into %s", len(result.replaced_ids), result.record.id)
        else:
            logger.info("Fusion of cluster seeded by %s rejected: %s", cluster.seed_id, result.cause)
        results.append(result)
    return results
