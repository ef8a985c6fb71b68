"""
This module computes the benchmark metrics.

Functions:
    compute_srr(retained, total_observed) -> float:
        Storage reduction rate, 1 - retained / total.

    compute_rp_at_k(retrieved, relevant, k) -> float:
        Precision of the top-k retrieved ids.

    compute_tcs(created_times) -> float:
        Pairwise chronological concordance of a ranking, ties counted half.

    asserted_value(content, fact_key) -> str | None:
        Value a text asserts for a templated fact, from its last statement.

    recount_srr / recount_rp_at_k / recount_tcs:
        Loop-based recomputations used to cross-check a run.

    macro_average(values) -> float | None:
        Mean of the defined values.

Classes:
    MetricsReport: Every metric of one run.
"""
import re
from collections.abc import Collection, Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from benchmark.trace_models import FIELD_SEPARATOR
from core.models import Timestamp

_VALUE_TOKEN = re.compile(r"[^\W_]+")


class MetricsReport(BaseModel):
    """
    Metrics of one benchmark run.

    Attributes:
        label (str): Run name (fademem, fifo, no_fusion, ...).
        srr (float): Storage reduction rate.
        rp_at_k (dict[int, float]): Mean retrieval precision per k.
        tcs (float): Mean temporal consistency of the query rankings.
        retention_critical (float): Share of critical facts recoverable at the end of the run.
        retention_contextual (float): Share of contextual observations recoverable at the end of the run.
        conflict_accuracy (dict[str, float | None]): Strategy-selection accuracy per conflict type;
            None when the run selects no strategies or saw no conflict of that type.
        conflict_consistency (dict[str, float | None]): Share of post-conflict queries answered with the
            current value, per conflict type.
        conflict_accuracy_macro (float | None): Mean of the defined per-type accuracies.
        conflict_consistency_macro (float | None): Mean of the defined per-type consistencies.
        promotion_rate (float): Share of memories inserted in SML that later entered LML.
        counts (dict[str, int]): Run statistics.
        oracle_agreement (dict[str, bool]): Whether each metric matches its loop-based recount.
    """

    model_config = ConfigDict(frozen=True)

    label: str
    srr: float
    rp_at_k: dict[int, float]
    tcs: float
    retention_critical: float
    retention_contextual: float
    conflict_accuracy: dict[str, float | None]
    conflict_consistency: dict[str, float | None]
    conflict_accuracy_macro: float | None
    conflict_consistency_macro: float | None
    promotion_rate: float
    counts: dict[str, int]
    oracle_agreement: dict[str, bool]


def compute_srr(retained: int, total_observed: int) -> float:
    """
    Storage reduction rate.

    Raises:
        ValueError: If nothing was observed or `retained` lies outside [0, total_observed].
    """
    if total_observed <= 0:
        raise ValueError("storage reduction needs at least one observation")
    if not 0 <= retained <= total_observed:
        raise ValueError(f"retained count {retained} outside [0, {total_observed}]")
    return 1 - retained / total_observed


def compute_rp_at_k(retrieved: Sequence[str], relevant: Collection[str], k: int) -> float:
    """
    Relevance precision at k: |top-k ∩ relevant| / min(k, |retrieved|).

    Args:
        retrieved (Sequence[str]): Ranked ids, best first.
        relevant (Collection[str]): Relevant ids, already mapped to the ids of the records holding them.
        k (int): Cut-off, at least 1.

    Returns:
        float: Precision in [0, 1]; 0.0 for an empty retrieval.

    Raises:
        ValueError: If k < 1.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    top = retrieved[:k]
    if not top:
        return 0.0
    return len(set(top) & set(relevant)) / min(k, len(retrieved))


def compute_tcs(created_times: Sequence[Timestamp]) -> float:
    """
    Temporal consistency of a ranking.

    Args:
        created_times (Sequence[Timestamp]): Creation times of the retrieved records in rank order.

    Returns:
        float: Share of rank-ordered pairs that are also in ascending creation order, ties counting 0.5;
        1.0 for fewer than two records.
    """
    if len(created_times) < 2:
        return 1.0
    times = np.asarray(created_times, dtype=np.float64)
    later = np.sign(times[None, :] - times[:, None])
    upper = np.triu_indices(len(times), k=1)
    pair_scores = (later[upper] + 1) / 2
    return float(pair_scores.mean())


def asserted_value(content: str, fact_key: str) -> str | None:
    """
    Value asserted for `fact_key` ("subject|predicate") by the last statement of it in `content`.

    Returns:
        str | None: The first token after the last "subject|predicate|", None when the fact is not mentioned.
    """
    marker = f"{fact_key}{FIELD_SEPARATOR}"
    position = content.rfind(marker)
    if position < 0:
        return None
    match = _VALUE_TOKEN.match(content, position + len(marker))
    return match.group(0).lower() if match else None


def macro_average(values: Iterable[float | None]) -> float | None:
    defined = [value for value in values if value is not None]
    if not defined:
        return None
    return sum(defined) / len(defined)


def recount_srr(operation_kinds: Iterable[str], retained: int) -> float:
    """SRR recounted from the kinds of a raw operation log."""
    observed = 0
    for kind in operation_kinds:
        if kind == "observe":
            observed += 1
    return 1 - retained / observed if observed else 0.0


def recount_rp_at_k(retrieved: Sequence[str], relevant: Collection[str], k: int) -> float:
    hits = 0
    considered = 0
    for record_id in retrieved:
        if considered == k:
            break
        considered += 1
        if record_id in relevant:
            hits += 1
    return hits / considered if considered else 0.0


def recount_tcs(created_times: Sequence[Timestamp]) -> float:
    pairs = 0
    concordant = 0.0
    for earlier_rank, earlier_time in enumerate(created_times):
        for later_time in created_times[earlier_rank + 1:]:
            pairs += 1
            if earlier_time < later_time:
                concordant += 1
            elif earlier_time == later_time:
                concordant += 0.5
    return concordant / pairs if pairs else 1.0
