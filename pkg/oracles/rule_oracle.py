"""
This module provides the deterministic oracle used offline, in tests and in the benchmark.

Functions:
    rule_classify(text_a: str, text_b: str) -> RelationVerdict:
        Token-set and subject|predicate|value template rules.

    split_sentences(text: str) -> list[str]:
        Sentences of a text, split after terminal punctuation.

    rule_merge(texts: Sequence[str]) -> str:
        Concatenation with sentence-level deduplication, original order kept.

    rule_preservation(sources: Sequence[str], merged: str) -> float:
        Share of the source token multiset present in the merged text.

Classes:
    RuleOracle: Relation, merge and preservation oracle around the functions above.
"""
import re
from collections import Counter
from collections.abc import Sequence

from conflict.conflict_models import Relation, RelationVerdict
from embedding.embedding_provider import tokenize

TEMPLATE_SEPARATOR = "|"
TEMPLATE_FIELDS = 3

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")
_WHITESPACE = re.compile(r"\s+")
_TERMINAL_PUNCTUATION = ".!?"


def _template_fields(text: str) -> tuple[tuple[str, ...], tuple[str, ...], frozenset[str]] | None:
    fields = text.split(TEMPLATE_SEPARATOR)
    if len(fields) != TEMPLATE_FIELDS:
        return None
    subject, predicate, value_text = fields
    return tuple(tokenize(subject)), tuple(tokenize(predicate)), frozenset(tokenize(value_text))


def _contradicts(text_a: str, text_b: str) -> bool:
    fields_a = _template_fields(text_a)
    fields_b = _template_fields(text_b)
    if fields_a is None or fields_b is None:
        return False
    subject_a, predicate_a, value_a = fields_a
    subject_b, predicate_b, value_b = fields_b
    if not subject_a or (subject_a, predicate_a) != (subject_b, predicate_b):
        return False
    return not (value_a <= value_b or value_b <= value_a)


def rule_classify(text_a: str, text_b: str) -> RelationVerdict:
    """
    Classifies the relation of a new text (a) to an existing text (b).

    Rules, first match wins:
        identical token sets -> SUBSUMED (the existing memory absorbs the duplicate);
        same subject and predicate with a different value -> CONTRADICTORY;
        tokens of a strictly contain tokens of b -> SUBSUMES, and the converse -> SUBSUMED;
        anything else -> COMPATIBLE.

    Args:
        text_a (str): The new memory's content.
        text_b (str): The existing memory's content.

    Returns:
        RelationVerdict: Verdict with the matched rule as rationale.
    """
    tokens_a = set(tokenize(text_a))
    tokens_b = set(tokenize(text_b))
    if tokens_a == tokens_b:
        return RelationVerdict(relation=Relation.SUBSUMED, rationale="identical token sets")
    if _contradicts(text_a, text_b):
        return RelationVerdict(relation=Relation.CONTRADICTORY, rationale="same subject and predicate, new value")
    if tokens_a > tokens_b:
        return RelationVerdict(relation=Relation.SUBSUMES, rationale="new text covers existing text")
    if tokens_a < tokens_b:
        return RelationVerdict(relation=Relation.SUBSUMED, rationale="existing text covers new text")
    return RelationVerdict(relation=Relation.COMPATIBLE, rationale=None)


def split_sentences(text: str) -> list[str]:
    """Non-empty sentences of `text`, split on whitespace that follows ., ! or ?."""
    return [sentence.strip() for sentence in _SENTENCE_BOUNDARY.split(text.strip()) if sentence.strip()]


def _sentence_key(sentence: str) -> str:
    return _WHITESPACE.sub(" ", sentence.lower()).strip().rstrip(_TERMINAL_PUNCTUATION).strip()


def _distinct_sentences(texts: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    distinct = []
    for text in texts:
        for sentence in split_sentences(text):
            key = _sentence_key(sentence)
            if key in seen:
                continue
            seen.add(key)
            distinct.append(sentence)
    return distinct


def rule_merge(texts: Sequence[str]) -> str:
    """
    Merges texts ordered by creation time.

    Sentences are deduplicated on their lowercased, whitespace-collapsed form without terminal
    punctuation; the first occurrence is kept. A non-final sentence without terminal punctuation
    gets a period so the result splits back into the same sentences.

    Args:
        texts (Sequence[str]): Source texts, oldest first.

    Returns:
        str: The merged text.

    Raises:
        ValueError: If `texts` is empty or contains no sentence.
    """
    if not texts:
        raise ValueError("cannot merge an empty list of texts")
    sentences = _distinct_sentences(texts)
    if not sentences:
        raise ValueError("sources contain no sentence")
    closed = [
        sentence if sentence.endswith(tuple(_TERMINAL_PUNCTUATION)) else f"{sentence}."
        for sentence in sentences[:-1]
    ]
    return " ".join([*closed, sentences[-1]])


def rule_preservation(sources: Sequence[str], merged: str) -> float:
    """
    Preservation score of a merged text.

    The source multiset counts the tokens of every distinct source sentence once, so duplicated
    sentences do not have to appear twice in the merge.

    Args:
        sources (Sequence[str]): Source texts.
        merged (str): Candidate merged text.

    Returns:
        float: |source tokens ∩ merged tokens| / |source tokens| over multisets; 1.0 when the sources have no token.

    Raises:
        ValueError: If `sources` is empty.
    """
    if not sources:
        raise ValueError("cannot score preservation without sources")
    source_tokens: Counter[str] = Counter()
    for sentence in _distinct_sentences(sources):
        source_tokens.update(tokenize(sentence))
    total = sum(source_tokens.values())
    if total == 0:
        return 1.0
    kept = source_tokens & Counter(tokenize(merged))
    return sum(kept.values()) / total


class RuleOracle:
    """Deterministic RelationOracle, MergeOracle and PreservationOracle."""

    async def classify(self, text_a: str, text_b: str) -> RelationVerdict:
        return rule_classify(text_a, text_b)

    async def merge(self, texts: Sequence[str]) -> str:
        return rule_merge(texts)

    async def preservation_score(self, sources: Sequence[str], merged: str) -> float:
        return rule_preservation(sources, merged)
