import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from core.config import EngineConfig
from core.models import Layer, MemoryRecord
from dynamics.context_window import ContextWindow
from dynamics.memory_dynamics import (
    accesses_in_window,
    assign_layer,
    consolidate,
    decay_rate,
    decayed_access_rate,
    half_life,
    importance,
    prune_crossing_time,
    prune_eligible,
    refresh_importance,
    strength_at,
)
from embedding.embedding_provider import deterministic_embed

EMBEDDING = deterministic_embed("alice likes tea")
PROPERTY_EXAMPLES = 1000
DEFAULT_CFG = EngineConfig()


def _record(**fields) -> MemoryRecord:
    fields.setdefault("id", "m000001")
    fields.setdefault("content", "alice likes tea")
    fields.setdefault("embedding", EMBEDDING)
    fields.setdefault("anchor_strength", 1.0)
    fields.setdefault("created_at", 0.0)
    fields.setdefault("anchor_time", fields["created_at"])
    return MemoryRecord(**fields)


def test_decayed_access_rate_examples() -> None:
    assert decayed_access_rate(_record(), 10.0, 0.1) == 0.0
    assert decayed_access_rate(_record(access_times=(10.0,)), 10.0, 0.1) == 1.0
    rate = decayed_access_rate(_record(access_times=(8.0, 9.0)), 10.0, 0.1)
    assert rate == pytest.approx(math.exp(-0.1) + math.exp(-0.2), abs=1e-12)
    assert rate == pytest.approx(1.7235, abs=1e-4)


def test_importance_with_all_terms_saturated(cfg: EngineConfig) -> None:
    record = _record(created_at=5.0, access_times=(5.0,))
    ctx = ContextWindow(max_len=5, embeddings=(EMBEDDING,))

    assert importance(record, ctx, 5.0, cfg) == pytest.approx(0.85, abs=1e-6)


def test_importance_vanishes_for_old_unused_memories(cfg: EngineConfig) -> None:
    assert importance(_record(), ContextWindow(), 1e4, cfg) == pytest.approx(0.0, abs=1e-12)


def test_refresh_importance_caches_the_score(cfg: EngineConfig) -> None:
    refreshed = refresh_importance(_record(), ContextWindow(), 0.0, cfg)
    assert refreshed.importance == pytest.approx(cfg.gamma)


@pytest.mark.parametrize(("score", "scale", "expected"), [
    (0.0, 1.0, 0.1),
    (1.0, 1.0, 0.1 * math.exp(-1)),
    (0.0, 1 / (1 + math.log(3)), 0.04765),
])
def test_decay_rate_examples(cfg: EngineConfig, score: float, scale: float, expected: float) -> None:
    assert decay_rate(score, scale, cfg) == pytest.approx(expected, abs=1e-5)


def test_strength_at_anchor_is_exact(cfg: EngineConfig) -> None:
    record = _record(anchor_strength=0.37, anchor_time=4.0)
    assert strength_at(record, 4.0, cfg) == 0.37
    assert strength_at(record, 3.0, cfg) == 0.37


@pytest.mark.parametrize(("layer", "elapsed"), [(Layer.SML, 5.02), (Layer.LML, 11.25)])
def test_strength_halves_after_published_half_life(cfg: EngineConfig, layer: Layer, elapsed: float) -> None:
    assert strength_at(_record(layer=layer), elapsed, cfg) == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize(("layer", "expected"), [(Layer.LML, 11.25), (Layer.SML, 5.02)])
def test_half_life(cfg: EngineConfig, layer: Layer, expected: float) -> None:
    days = half_life(0.0, layer, cfg)

    assert days == pytest.approx(expected, abs=0.01)
    record = _record(layer=layer, anchor_strength=0.8, created_at=2.0)
    assert strength_at(record, 2.0 + days, cfg) == pytest.approx(0.4, abs=1e-9)


def test_single_layer_mode_uses_the_short_term_shape() -> None:
    cfg = EngineConfig(dual_layer=False)
    assert half_life(0.0, Layer.LML, cfg) == pytest.approx(5.02, abs=0.01)


def test_consolidation_examples(cfg: EngineConfig) -> None:
    full = consolidate(_record(), 0.0, cfg)
    assert full.anchor_strength == 1.0

    half = consolidate(_record(anchor_strength=0.5, created_at=3.0), 3.0, cfg)
    assert half.anchor_strength == pytest.approx(0.6)
    assert half.anchor_time == 3.0
    assert half.access_times == (3.0,)


def test_consolidation_has_diminishing_returns(cfg: EngineConfig) -> None:
    busy = _record(anchor_strength=0.5, created_at=0.0, anchor_time=10.0, access_times=(6.0, 7.0, 8.0, 9.0, 10.0))

    assert accesses_in_window(busy, 10.0, cfg.window_days) == 5
    reinforced = consolidate(busy, 10.0, cfg)
    assert reinforced.anchor_strength == pytest.approx(0.5 + 0.2 * 0.5 * math.exp(-1))


@pytest.mark.parametrize(("score", "current", "expected"), [
    (0.75, Layer.SML, Layer.LML),
    (0.5, Layer.LML, Layer.LML),
    (0.5, Layer.SML, Layer.SML),
    (0.2, Layer.LML, Layer.SML),
    (0.7, Layer.SML, Layer.LML),
])
def test_layer_assignment_with_hysteresis(cfg: EngineConfig, score: float, current: Layer, expected: Layer) -> None:
    assert assign_layer(_record(importance=score, layer=current), cfg) is expected


def test_single_layer_mode_keeps_everything_short_term() -> None:
    assert assign_layer(_record(importance=0.9), EngineConfig(dual_layer=False)) is Layer.SML


def test_prune_eligibility(cfg: EngineConfig) -> None:
    assert not prune_eligible(_record(), 0.0, cfg)
    assert prune_eligible(_record(anchor_strength=0.01), 0.0, cfg)
    dormant = _record(importance=1.0, layer=Layer.LML)
    assert not prune_eligible(dormant, 44.0, cfg)
    assert prune_eligible(dormant, 46.0, cfg)


def test_prune_crossing_time_reaches_the_floor(cfg: EngineConfig) -> None:
    crossing = prune_crossing_time(0.9, 0.3, Layer.SML, cfg)
    record = _record(anchor_strength=0.9, importance=0.3)

    assert strength_at(record, crossing, cfg) == pytest.approx(cfg.eps_prune, rel=1e-9)
    assert prune_crossing_time(0.04, 0.3, Layer.SML, cfg) == 0.0
    assert prune_crossing_time(0.9, 0.3, Layer.SML, EngineConfig(eps_prune=0)) == math.inf


def test_context_window_evicts_oldest() -> None:
    ctx = ContextWindow(max_len=2)
    first, second, third = (deterministic_embed(text) for text in ("one", "two", "three"))

    pushed = ctx.push(first).push(second).push(third)

    assert pushed.embeddings == (second, third)
    assert ctx.embeddings == ()
    with pytest.raises(ValidationError):
        ContextWindow(max_len=1, embeddings=(first, second))


def test_record_rejects_inconsistent_times() -> None:
    with pytest.raises(ValidationError):
        _record(created_at=5.0, anchor_time=4.0)
    with pytest.raises(ValidationError):
        _record(created_at=5.0, access_times=(4.0,))
    with pytest.raises(ValidationError):
        _record(access_times=(3.0, 2.0))
    with pytest.raises(ValidationError):
        _record(embedding=(0.5, 0.5))


unit = st.floats(min_value=0.0, max_value=1.0)
days = st.floats(min_value=0.0, max_value=400.0)
layers = st.sampled_from(list(Layer))


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(anchor=unit, score=unit, layer=layers, first=days, gap=days)
def test_strength_is_bounded_and_never_increases(anchor: float, score: float, layer: Layer, first: float, gap: float) -> None:
    record = _record(anchor_strength=anchor, importance=score, layer=layer)

    earlier = strength_at(record, first, DEFAULT_CFG)
    later = strength_at(record, first + gap, DEFAULT_CFG)

    assert 0.0 <= later <= earlier <= anchor


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(anchor=unit, score=unit, layer=layers, elapsed=days, accesses=st.lists(days, max_size=8))
def test_consolidation_never_weakens(
    anchor: float,
    score: float,
    layer: Layer,
    elapsed: float,
    accesses: list[float],
) -> None:
    record = _record(anchor_strength=anchor, importance=score, layer=layer, access_times=tuple(sorted(accesses)))
    now = max([elapsed, *accesses])

    reinforced = consolidate(record, now, DEFAULT_CFG)

    assert strength_at(record, now, DEFAULT_CFG) <= reinforced.anchor_strength <= 1.0
    assert reinforced.access_times[-1] == now


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(
    accesses=st.lists(days, max_size=8),
    created=days,
    elapsed=days,
    with_context=st.booleans(),
)
def test_importance_stays_in_unit_interval(
    accesses: list[float],
    created: float,
    elapsed: float,
    with_context: bool,
) -> None:
    access_times = tuple(sorted(created + access for access in accesses))
    record = _record(created_at=created, access_times=access_times)
    ctx = ContextWindow(embeddings=(EMBEDDING,)) if with_context else ContextWindow()
    now = max([created + elapsed, *access_times])

    assert 0.0 <= importance(record, ctx, now, DEFAULT_CFG) <= 1.0


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(score=st.floats(min_value=0.3, max_value=0.7, exclude_max=True), layer=layers)
def test_hysteresis_band_keeps_the_layer(score: float, layer: Layer) -> None:
    assert assign_layer(_record(importance=score, layer=layer), DEFAULT_CFG) is layer


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(lower=unit, upper=unit)
def test_decay_slows_as_importance_grows(lower: float, upper: float) -> None:
    assume(upper - lower > 1e-6)

    assert decay_rate(lower, 1.0, DEFAULT_CFG) > decay_rate(upper, 1.0, DEFAULT_CFG)
    assert half_life(lower, Layer.SML, DEFAULT_CFG) < half_life(upper, Layer.SML, DEFAULT_CFG)


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(score=unit, anchor=unit, elapsed=st.floats(min_value=1.0, max_value=400.0))
def test_long_term_layer_decays_slower_after_the_first_day(score: float, anchor: float, elapsed: float) -> None:
    long_term = _record(anchor_strength=anchor, importance=score, layer=Layer.LML)
    short_term = _record(anchor_strength=anchor, importance=score, layer=Layer.SML)

    assert strength_at(long_term, elapsed, DEFAULT_CFG) >= strength_at(short_term, elapsed, DEFAULT_CFG)
    assert strength_at(long_term, 1 / elapsed, DEFAULT_CFG) <= strength_at(short_term, 1 / elapsed, DEFAULT_CFG)


@settings(max_examples=PROPERTY_EXAMPLES, deadline=None)
@given(
    scores=st.lists(st.floats(min_value=0.3, max_value=0.7, exclude_max=True), min_size=100, max_size=100),
    layer=layers,
)
def test_layer_never_oscillates_inside_the_band(scores: list[float], layer: Layer) -> None:
    record = _record(layer=layer)
    for score in scores:
        record = record.model_copy(update={"importance": score})
        record = record.model_copy(update={"layer": assign_layer(record, DEFAULT_CFG)})

        assert record.layer is layer
