import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conflict.conflict_models import Relation
from embedding.embedding_provider import tokenize
from oracles.oracle_protocols import MergeOracle, PreservationOracle, RelationOracle
from oracles.rule_oracle import RuleOracle, rule_classify, rule_merge, rule_preservation, split_sentences


@pytest.mark.parametrize(("text_a", "text_b", "expected"), [
    ("alice likes tea", "alice likes tea", Relation.SUBSUMED),
    ("Alice likes tea!", "alice LIKES tea", Relation.SUBSUMED),
    ("alice likes tea and toast", "alice likes tea", Relation.SUBSUMES),
    ("alice likes tea", "alice likes tea and toast", Relation.SUBSUMED),
    ("fav_color|alice|blue", "fav_color|alice|red", Relation.CONTRADICTORY),
    ("alice likes tea", "bob drinks coffee", Relation.COMPATIBLE),
    ("fav_color|alice|blue", "fav_color|bob|red", Relation.COMPATIBLE),
    ("fav_color|alice|blue", "fav_color|alice|blue dark", Relation.SUBSUMED),
    ("fav_color|alice|blue dark", "fav_color|alice|blue", Relation.SUBSUMES),
])
def test_rule_classify(text_a: str, text_b: str, expected: Relation) -> None:
    assert rule_classify(text_a, text_b).relation is expected


def test_verdict_carries_the_rule() -> None:
    assert rule_classify("k|p|v1", "k|p|v2").rationale == "same subject and predicate, new value"


words = st.sampled_from(["alice", "bob", "tea", "coffee", "likes", "paris", "blue", "red"])
plain_texts = st.lists(words, min_size=1, max_size=5).map(" ".join)
template_texts = st.tuples(
    st.sampled_from(["fav_color", "home"]),
    st.sampled_from(["alice", "bob"]),
    st.lists(words, min_size=1, max_size=2).map(" ".join),
).map("|".join)
texts = st.one_of(plain_texts, template_texts)


@settings(max_examples=500, deadline=None)
@given(text_a=texts, text_b=texts)
def test_classification_is_mirror_symmetric(text_a: str, text_b: str) -> None:
    assume(set(tokenize(text_a)) != set(tokenize(text_b)))

    forward = rule_classify(text_a, text_b).relation
    backward = rule_classify(text_b, text_a).relation

    assert backward is forward.mirrored()


def test_split_sentences() -> None:
    assert split_sentences("One. Two!  Three? four") == ["One.", "Two!", "Three?", "four"]
    assert split_sentences("   ") == []


def test_merge_of_duplicates_keeps_one_sentence() -> None:
    sources = ["Alice likes tea.", "alice  LIKES tea"]

    merged = rule_merge(sources)

    assert merged == "Alice likes tea."
    assert rule_preservation(sources, merged) == 1.0


def test_merge_of_disjoint_sentences_keeps_order() -> None:
    sources = ["Alice likes tea.", "Bob likes coffee."]

    merged = rule_merge(sources)

    assert merged == "Alice likes tea. Bob likes coffee."
    assert rule_preservation(sources, merged) == 1.0


def test_merge_closes_unterminated_sentences_and_is_idempotent() -> None:
    merged = rule_merge(["k|p|v", "k|p|v extra detail"])

    assert merged == "k|p|v. k|p|v extra detail"
    assert rule_merge([merged]) == merged


def test_merge_rejects_empty_input() -> None:
    with pytest.raises(ValueError):
        rule_merge([])
    with pytest.raises(ValueError):
        rule_merge(["   "])


def test_preservation_counts_missing_tokens() -> None:
    sources = ["one two three four five six seven eight nine ten"]

    assert rule_preservation(sources, "one two three four five six seven eight") == pytest.approx(0.8)
    assert rule_preservation(["..."], "anything") == 1.0
    with pytest.raises(ValueError):
        rule_preservation([], "anything")


async def test_rule_oracle_implements_every_protocol(rule_oracle: RuleOracle) -> None:
    assert isinstance(rule_oracle, RelationOracle)
    assert isinstance(rule_oracle, MergeOracle)
    assert isinstance(rule_oracle, PreservationOracle)
    verdict = await rule_oracle.classify("alice likes tea", "alice likes tea")
    assert verdict.relation is Relation.SUBSUMED
    assert await rule_oracle.merge(["a b.", "c d."]) == "a b. c d."
    assert await rule_oracle.preservation_score(["a b"], "a") == 0.5
