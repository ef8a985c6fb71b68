import math

import numpy as np
import pytest

from conflict.conflict_models import Relation, strategy_for
from conflict.conflict_resolver import (
    find_conflict_candidates,
    resolve,
    resolve_compatible,
    resolve_contradictory,
    resolve_subsumption,
    suppression_factor,
)
from core.config import EngineConfig
from dynamics.memory_dynamics import strength_at
from embedding.embedding_provider import cosine_similarity, normalize, similarity_scores


def test_no_candidates_in_an_empty_store(make_record, cfg: EngineConfig) -> None:
    assert find_conflict_candidates(make_record("alice likes tea"), [], cfg) == []


def test_threshold_is_strict(make_record) -> None:
    new = make_record("new", embedding=(1.0, 0.0))
    existing = make_record("old", record_id="m000002", embedding=normalize([0.8, 0.6]))
    similarity = float(similarity_scores(new.embedding, [existing.embedding])[0])

    assert find_conflict_candidates(new, [existing], EngineConfig(theta_sim=similarity)) == []
    assert find_conflict_candidates(new, [existing], EngineConfig(theta_sim=similarity - 1e-6)) == [existing]


def test_candidates_match_a_full_scan(make_record) -> None:
    rng = np.random.default_rng(11)
    cfg = EngineConfig(theta_sim=0.8)
    found = 0
    for _ in range(100):
        base = rng.normal(size=32)
        noise = float(rng.uniform(0.3, 0.9))
        records = [
            make_record(
                f"memory {index}",
                record_id=f"m{index:06d}",
                created_at=float(rng.integers(0, 5)),
                embedding=normalize(base + rng.normal(scale=noise, size=32)),
            )
            for index in range(1, int(rng.integers(1, 51)) + 1)
        ]
        new = make_record("incoming", record_id="m000099", embedding=normalize(base))

        scanned = []
        for record in records:
            similarity = cosine_similarity(new.embedding, record.embedding)
            if similarity > cfg.theta_sim:
                scanned.append((-similarity, record.created_at, record.id))
        expected = [record_id for _, _, record_id in sorted(scanned)]

        candidates = find_conflict_candidates(new, records, cfg)

        assert [record.id for record in candidates] == expected
        found += len(candidates)
    assert found > 0


def test_compatible_penalty(make_record, cfg: EngineConfig) -> None:
    existing = make_record("alice likes tea", importance=0.8)

    assert resolve_compatible(existing, 0.8, cfg).importance == pytest.approx(0.64)
    assert resolve_compatible(existing, 0.0, cfg) is existing


@pytest.mark.parametrize(("created_at", "expected"), [(0.0, 0.9 * math.exp(-0.5)), (25.0, 0.9 * math.exp(-0.25))])
def test_contradiction_suppresses_by_age_gap(make_record, cfg: EngineConfig, created_at: float, expected: float) -> None:
    existing = make_record("k|p|old", created_at=created_at, anchor_strength=0.9, anchor_time=40.0)

    suppressed = resolve_contradictory(existing, 40.0, 40.0, cfg)

    assert suppressed.anchor_strength == pytest.approx(expected, abs=1e-12)
    assert suppressed.anchor_time == 40.0


def test_contradiction_from_an_older_memory_changes_nothing(make_record, cfg: EngineConfig) -> None:
    existing = make_record("k|p|old", created_at=10.0)

    assert suppression_factor(5.0, 10.0, cfg) == 1.0
    assert resolve_contradictory(existing, 10.0, 12.0, cfg) is existing


async def test_subsumption_of_a_contained_text(make_record, rule_oracle, cfg: EngineConfig) -> None:
    general = make_record("alice likes tea and toast", created_at=0.0)
    specific = make_record("alice likes tea", record_id="m000002", created_at=1.0)

    outcome = await resolve_subsumption(general, specific, rule_oracle, 1.0, cfg)

    assert outcome.merged_content == general.content
    assert outcome.removed == ["m000002"]
    absorbed = outcome.updated[general.id]
    assert absorbed.merged_ids == ("m000002",)
    assert absorbed.anchor_time == 1.0
    assert absorbed.anchor_strength == pytest.approx(max(strength_at(general, 1.0, cfg), 1.0))


async def test_subsumption_keeps_the_whole_access_history(make_record, rule_oracle, cfg: EngineConfig) -> None:
    older = make_record("alice likes tea", created_at=0.0, access_times=(0.5, 2.0))
    newer = make_record("alice likes tea and toast", record_id="m000002", created_at=3.0, access_times=(3.5,))

    outcome = await resolve_subsumption(newer, older, rule_oracle, 4.0, cfg)

    absorbed = outcome.updated[newer.id]
    assert absorbed.access_times == (0.5, 2.0, 3.5)
    assert absorbed.created_at == 0.0
    assert absorbed.layer is newer.layer


async def test_new_general_memory_inherits_the_query_history(make_record, rule_oracle, cfg: EngineConfig) -> None:
    existing = make_record("alice likes tea", access_times=(0.5, 1.5))
    new = make_record("alice likes tea and toast", record_id="m000002", created_at=2.0)

    outcome = await resolve(new, [existing], rule_oracle, rule_oracle, 2.0, cfg)

    assert outcome.inserted is not None
    assert outcome.inserted.access_times == (0.5, 1.5)


async def test_subsumption_appends_novel_sentences(make_record, rule_oracle, embedder, cfg: EngineConfig) -> None:
    general = make_record("Alice likes tea.", created_at=0.0)
    specific = make_record("She visits Paris.", record_id="m000002", created_at=1.0)

    outcome = await resolve_subsumption(general, specific, rule_oracle, 1.0, cfg, embedder)

    assert outcome.merged_content == "Alice likes tea. She visits Paris."
    assert outcome.updated[general.id].embedding == await embedder.embed("Alice likes tea. She visits Paris.")


async def test_merge_failure_keeps_both(make_record, failing_oracle, cfg: EngineConfig) -> None:
    general = make_record("Alice likes tea.")
    specific = make_record("She visits Paris.", record_id="m000002")

    outcome = await resolve_subsumption(general, specific, failing_oracle, 0.0, cfg)

    assert outcome.merge_failed
    assert outcome.removed == []
    assert outcome.updated == {}
    assert outcome.kept == [general.id, specific.id]


async def test_resolve_without_candidates_inserts(make_record, rule_oracle, cfg: EngineConfig) -> None:
    new = make_record("alice likes tea")

    outcome = await resolve(new, [], rule_oracle, rule_oracle, 0.0, cfg)

    assert outcome.inserted == new
    assert outcome.modified == []
    assert outcome.kept == [new.id]


async def test_resolve_contradiction_with_an_old_memory(make_record, rule_oracle, cfg: EngineConfig) -> None:
    existing = make_record("fav_color|alice|blue", created_at=0.0)
    new = make_record("fav_color|alice|red", record_id="m000002", created_at=40.0)

    outcome = await resolve(new, [existing], rule_oracle, rule_oracle, 40.0, cfg)

    assert outcome.applied == {existing.id: Relation.CONTRADICTORY}
    assert strategy_for(outcome.applied[existing.id]) == "suppress"
    expected = strength_at(existing, 40.0, cfg) * math.exp(-cfg.rho)
    assert outcome.updated[existing.id].anchor_strength == pytest.approx(expected)
    assert outcome.inserted == new
    assert [change.field for change in outcome.modified] == ["anchor_strength"]


async def test_resolve_duplicate_is_absorbed(make_record, rule_oracle, cfg: EngineConfig) -> None:
    existing = make_record("alice likes tea", access_times=(0.5,))
    new = make_record("Alice likes tea.", record_id="m000002", created_at=2.0)

    outcome = await resolve(new, [existing], rule_oracle, rule_oracle, 2.0, cfg)

    assert outcome.inserted is None
    assert outcome.absorbed_into == existing.id
    assert outcome.removed == []
    assert outcome.updated[existing.id].merged_ids == ("m000002",)
    assert outcome.updated[existing.id].content == "alice likes tea"
    assert outcome.kept == [existing.id]


async def test_resolve_new_memory_absorbs_existing(make_record, rule_oracle, cfg: EngineConfig) -> None:
    existing = make_record("alice likes tea")
    new = make_record("alice likes tea and toast", record_id="m000002", created_at=1.0)

    outcome = await resolve(new, [existing], rule_oracle, rule_oracle, 1.0, cfg)

    assert outcome.applied == {existing.id: Relation.SUBSUMES}
    assert outcome.removed == [existing.id]
    assert outcome.inserted is not None
    assert outcome.inserted.merged_ids == (existing.id,)
    assert outcome.kept == [new.id]


async def test_classifier_failure_falls_back_to_compatible(
    make_record,
    failing_oracle,
    rule_oracle,
    cfg: EngineConfig,
) -> None:
    existing = make_record("alice likes tea", importance=0.5)
    new = make_record("alice likes tea", record_id="m000002")

    outcome = await resolve(new, [existing], failing_oracle, rule_oracle, 0.0, cfg)

    assert outcome.applied == {existing.id: Relation.COMPATIBLE}
    assert len(outcome.fallbacks) == 1
    assert outcome.updated[existing.id].importance < 0.5
    assert outcome.inserted == new


async def test_resolve_is_deterministic(make_record, rule_oracle, cfg: EngineConfig) -> None:
    candidates = [
        make_record("k|p|v1", created_at=0.0),
        make_record("k|p|v1 detail", record_id="m000002", created_at=1.0),
    ]
    new = make_record("k|p|v2", record_id="m000003", created_at=9.0)

    first = await resolve(new, candidates, rule_oracle, rule_oracle, 9.0, cfg)
    second = await resolve(new, candidates, rule_oracle, rule_oracle, 9.0, cfg)

    assert first == second
    assert set(first.applied.values()) == {Relation.CONTRADICTORY}
