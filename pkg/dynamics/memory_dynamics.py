"""
This module implements the scalar dynamics of a single memory.

Everything here is a pure function of its inputs; records are returned as new values.

Functions:
    decayed_access_rate(record, now, kappa) -> float:
        Exponentially time-decayed access rate, sum of exp(-kappa * (now - t_j)).

    relevance(embedding, ctx) -> float:
        Max cosine similarity against the context window, clamped to [0, 1].

    relevance_scores(vectors, ctx) -> np.ndarray:
        Row-wise relevance of an (n, dim) embedding matrix.

    importance(record, ctx, now, cfg, rel=None) -> float:
        Convex combination of relevance, saturated access rate and recency.

    refresh_importance(record, ctx, now, cfg, rel=None) -> MemoryRecord:
        The record with its cached importance re-evaluated at `now`.

    decay_rate(importance, decay_scale, cfg) -> float:
        lambda = lambda_base * decay_scale * exp(-mu * importance).

    shape_exponent(layer, cfg) -> float:
        Sub-linear exponent for LML, super-linear for SML (SML only when dual_layer is off).

    strength_at(record, now, cfg) -> float:
        anchor_strength * exp(-lambda * elapsed ** beta).

    half_life(importance, layer, cfg) -> float:
        (ln 2 / lambda) ** (1 / beta), in days.

    prune_crossing_time(anchor_strength, importance, layer, cfg, decay_scale=1.0) -> float:
        Days after the anchor at which strength falls to eps_prune.

    accesses_in_window(record, now, window_days) -> int:
        Accesses within (now - W, now].

    consolidate(record, now, cfg) -> MemoryRecord:
        Access-driven reinforcement with diminishing returns; resets the anchor and logs the access.

    assign_layer(record, cfg) -> Layer:
        Two-threshold layer assignment with a hysteresis band.

    prune_eligible(record, now, cfg) -> bool:
        Strength below eps_prune or dormant longer than t_max_days.
"""
import math

import numpy as np

from core.config import EngineConfig
from core.models import Embedding, Layer, MemoryRecord, Timestamp
from dynamics.context_window import ContextWindow
from embedding.embedding_provider import as_vector, embedding_matrix


def decayed_access_rate(record: MemoryRecord, now: Timestamp, kappa: float) -> float:
    """
    Exponentially time-decayed access rate of a record.

    Args:
        record (MemoryRecord): The memory whose access history is summed.
        now (Timestamp): Evaluation time, not earlier than any access.
        kappa (float): Decay of an access's weight per day.

    Returns:
        float: Sum over accesses of exp(-kappa * (now - t_j)); 0.0 without accesses.
    """
    return math.fsum(math.exp(-kappa * (now - access_time)) for access_time in record.access_times)


def relevance(embedding: Embedding, ctx: ContextWindow) -> float:
    """Max cosine similarity between `embedding` and the context window, clamped to [0, 1]; 0 for an empty window."""
    return float(relevance_scores(as_vector(embedding)[np.newaxis, :], ctx)[0])


def relevance_scores(vectors: np.ndarray, ctx: ContextWindow) -> np.ndarray:
    """Relevance of every row of `vectors` against the context window; zeros for an empty window."""
    if not ctx.embeddings or not len(vectors):
        return np.zeros(len(vectors), dtype=np.float64)
    similarities = vectors @ embedding_matrix(ctx.embeddings).T
    return np.clip(similarities.max(axis=1), 0, 1)


def importance(
    record: MemoryRecord,
    ctx: ContextWindow,
    now: Timestamp,
    cfg: EngineConfig,
    rel: float | None = None,
) -> float:
    """
    Importance score of a memory at `now`.

    Args:
        record (MemoryRecord): The memory.
        ctx (ContextWindow): Recent query embeddings.
        now (Timestamp): Evaluation time.
        cfg (EngineConfig): Supplies alpha, beta_freq, gamma, delta and kappa.
        rel (float | None): Relevance already computed against `ctx`, e.g. by `relevance_scores`.

    Returns:
        float: alpha * rel + beta_freq * f / (1 + f) + gamma * exp(-delta * age), within [0, 1].
    """
    if rel is None:
        rel = relevance(record.embedding, ctx)
    access_rate = decayed_access_rate(record, now, cfg.kappa)
    age = max(0.0, now - record.created_at)
    score = (
        cfg.alpha * rel
        + cfg.beta_freq * access_rate / (1 + access_rate)
        + cfg.gamma * math.exp(-cfg.delta * age)
    )
    return min(1.0, max(0.0, score))


def refresh_importance(
    record: MemoryRecord,
    ctx: ContextWindow,
    now: Timestamp,
    cfg: EngineConfig,
    rel: float | None = None,
) -> MemoryRecord:
    """The record with its cached importance re-evaluated at `now`."""
    return record.model_copy(update={"importance": importance(record, ctx, now, cfg, rel)})


def decay_rate(importance_score: float, decay_scale: float, cfg: EngineConfig) -> float:
    """lambda = lambda_base * decay_scale * exp(-mu * importance)."""
    return cfg.lambda_base * decay_scale * math.exp(-cfg.mu * importance_score)


def shape_exponent(layer: Layer, cfg: EngineConfig) -> float:
    """Shape exponent of the forgetting curve for a layer."""
    if layer is Layer.LML and cfg.dual_layer:
        return cfg.shape_lml
    return cfg.shape_sml


def strength_at(record: MemoryRecord, now: Timestamp, cfg: EngineConfig) -> float:
    """
    Memory strength at `now`, derived from the anchor.

    Elapsed time before the anchor is treated as zero.

    Args:
        record (MemoryRecord): The memory.
        now (Timestamp): Evaluation time.
        cfg (EngineConfig): Decay parameters.

    Returns:
        float: anchor_strength * exp(-lambda * (now - anchor_time) ** beta_layer).
    """
    elapsed = max(0.0, now - record.anchor_time)
    if elapsed == 0:
        return record.anchor_strength
    rate = decay_rate(record.importance, record.decay_scale, cfg)
    return record.anchor_strength * math.exp(-rate * elapsed ** shape_exponent(record.layer, cfg))


def half_life(importance_score: float, layer: Layer, cfg: EngineConfig) -> float:
    """Days for strength to halve at a fixed importance: (ln 2 / lambda) ** (1 / beta)."""
    rate = decay_rate(importance_score, 1.0, cfg)
    return (math.log(2) / rate) ** (1 / shape_exponent(layer, cfg))


def prune_crossing_time(
    anchor_strength: float,
    importance_score: float,
    layer: Layer,
    cfg: EngineConfig,
    decay_scale: float = 1.0,
) -> float:
    """
    Days after the anchor at which strength reaches eps_prune.

    Returns:
        float: (ln(v0 / eps_prune) / lambda) ** (1 / beta); 0.0 when already at or below the floor,
        infinity when eps_prune is 0.
    """
    if cfg.eps_prune == 0:
        return math.inf
    if anchor_strength <= cfg.eps_prune:
        return 0.0
    rate = decay_rate(importance_score, decay_scale, cfg)
    return (math.log(anchor_strength / cfg.eps_prune) / rate) ** (1 / shape_exponent(layer, cfg))


def accesses_in_window(record: MemoryRecord, now: Timestamp, window_days: float) -> int:
    """Number of accesses within (now - window_days, now]."""
    lower_bound = now - window_days
    return sum(1 for access_time in record.access_times if lower_bound < access_time <= now)


def consolidate(record: MemoryRecord, now: Timestamp, cfg: EngineConfig) -> MemoryRecord:
    """
    Reinforces a memory on access.

    v+ = v + delta_v * (1 - v) * exp(-n / N), with n the accesses in the last window_days.
    The anchor moves to (v+, now) and `now` is appended to the access history.

    Args:
        record (MemoryRecord): The accessed memory.
        now (Timestamp): Access time, not earlier than the anchor.
        cfg (EngineConfig): Supplies delta_v, window_days and big_n.

    Returns:
        MemoryRecord: The reinforced record.
    """
    current = strength_at(record, now, cfg)
    recent_accesses = accesses_in_window(record, now, cfg.window_days)
    reinforced = current + cfg.delta_v * (1 - current) * math.exp(-recent_accesses / cfg.big_n)
    return record.model_copy(update={
        "anchor_strength": min(1.0, max(current, reinforced)),
        "anchor_time": max(now, record.anchor_time),
        "access_times": (*record.access_times, now),
    })


def assign_layer(record: MemoryRecord, cfg: EngineConfig) -> Layer:
    """
    Layer for a record given its freshly cached importance.

    Args:
        record (MemoryRecord): The record, importance already refreshed.
        cfg (EngineConfig): Supplies theta_promote, theta_demote and the dual_layer switch.

    Returns:
        Layer: LML at or above theta_promote, SML below theta_demote, unchanged in between.
    """
    if not cfg.dual_layer:
        return Layer.SML
    if record.importance >= cfg.theta_promote:
        return Layer.LML
    if record.importance < cfg.theta_demote:
        return Layer.SML
    return record.layer


def prune_eligible(record: MemoryRecord, now: Timestamp, cfg: EngineConfig) -> bool:
    """True when strength is below eps_prune or the memory has been dormant longer than t_max_days."""
    if strength_at(record, now, cfg) < cfg.eps_prune:
        return True
    return now - record.last_touched > cfg.t_max_days
