"""
This module generates seeded synthetic interaction traces.

A trace mixes critical facts, templated as "subject|predicate|value" and re-queried throughout the run,
with contextual chatter that is rarely queried again. Part of the chatter arrives as episodes of
near-duplicate sentences. Conflicts are injected on critical facts as contradictions, updates and
overlaps, each labelled with the statement it conflicts with and the expected strategy.

Classes:
    TraceParams: Shape of a generated trace.

Functions:
    generate_trace(seed: int, days: int, params: TraceParams | None = None) -> list[TraceEvent]:
        Pure function of its arguments.
"""
import random
from collections.abc import Iterator

from pydantic import BaseModel, ConfigDict, Field

from benchmark.trace_models import (
    EVENT_ID_WIDTH,
    FIELD_SEPARATOR,
    Category,
    ConflictLabel,
    ConflictType,
    EventType,
    TraceEvent,
    TraceLabels,
)
from conflict.conflict_models import STRATEGY_MERGE, STRATEGY_SUPPRESS

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"
WORD_SYLLABLES = 3
SUBJECT_WORDS = 2
PREDICATE_WORDS = 4
CHATTER_VOCABULARY = 600

CONFLICT_GAPS = {
    ConflictType.CONTRADICTION: (4.0, 6.0),
    ConflictType.UPDATE: (7.0, 10.0),
    ConflictType.OVERLAP: (4.0, 10.0),
}
CORRECT_STRATEGY = {
    ConflictType.CONTRADICTION: STRATEGY_SUPPRESS,
    ConflictType.UPDATE: STRATEGY_SUPPRESS,
    ConflictType.OVERLAP: STRATEGY_MERGE,
}


class TraceParams(BaseModel):
    """
    Shape of a generated trace.

    Attributes:
        critical_facts (int): Number of templated facts.
        chatter_per_day (int): Contextual observations per day.
        episode_share (float): Probability that a chatter slot starts an episode of near-duplicates.
        episode_size (int): Observations per episode.
        episode_span_days (float): Maximum spread of an episode in time.
        chatter_sentence_words (int): Words per chatter sentence.
        chatter_requery_share (float): Probability that a chatter observation is queried once later.
        conflict_rate (float): Probability that a conflict opportunity injects a conflict.
        overlap_share (float): Share of facts whose only conflict is an overlap.
        detail_words (int): Extra words an overlap adds to the value.
        intro_share (float): Facts are introduced during the first `intro_share` of the run.
        requery_min_days (float): Minimum gap between canonical queries of a fact.
        requery_max_days (float): Maximum gap between canonical queries of a fact.
        post_conflict_delay (float): Delay of the canonical query that follows a conflict.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    critical_facts: int = Field(default=80, ge=0)
    chatter_per_day: int = Field(default=15, ge=0)
    episode_share: float = Field(default=0.4, ge=0, le=1)
    episode_size: int = Field(default=3, ge=2)
    episode_span_days: float = Field(default=0.8, gt=0)
    chatter_sentence_words: int = Field(default=12, ge=2)
    chatter_requery_share: float = Field(default=0.05, ge=0, le=1)
    conflict_rate: float = Field(default=0.7, ge=0, le=1)
    overlap_share: float = Field(default=0.2, ge=0, le=1)
    detail_words: int = Field(default=2, ge=1)
    intro_share: float = Field(default=0.6, gt=0, le=1)
    requery_min_days: float = Field(default=3.0, gt=0)
    requery_max_days: float = Field(default=5.0, gt=0)
    post_conflict_delay: float = Field(default=0.05, gt=0)


class _Draft(BaseModel):
    """An event before ids are assigned; references point at draft keys."""

    key: int
    at: float
    kind: EventType
    text: str
    category: Category
    relevant_keys: tuple[int, ...] = ()
    conflict_type: ConflictType | None = None
    target_key: int | None = None
    conflict_ref_key: int | None = None
    canonical_query: str | None = None
    fact_key: str | None = None
    value: str | None = None


class _Fact(BaseModel):
    subject: str
    predicate: str
    values: list[str]
    details: list[str]

    @property
    def key(self) -> str:
        return f"{self.subject}{FIELD_SEPARATOR}{self.predicate}"

    @property
    def canonical_query(self) -> str:
        return " ".join([*self.subject.split("_"), *self.predicate.split("_")])

    def statement(self, value: str, detail: bool = False) -> str:
        value_field = " ".join([value, *self.details]) if detail else value
        return f"{self.key}{FIELD_SEPARATOR}{value_field}"


class _TraceBuilder:
    def __init__(self, seed: int, days: int, params: TraceParams) -> None:
        self.rng = random.Random(seed)
        self.days = days
        self.params = params
        self.drafts: list[_Draft] = []
        self._words = self._vocabulary()

    def add(self, **fields: object) -> _Draft:
        draft = _Draft.model_validate({"key": len(self.drafts), **fields})
        self.drafts.append(draft)
        return draft

    def take_words(self, count: int) -> list[str]:
        return [next(self._words) for _ in range(count)]

    def _vocabulary(self) -> Iterator[str]:
        syllables = [consonant + vowel for consonant in CONSONANTS for vowel in VOWELS]
        space = len(syllables) ** WORD_SYLLABLES
        for index in self.rng.sample(range(space), min(space, 20000)):
            word = []
            for _ in range(WORD_SYLLABLES):
                index, syllable = divmod(index, len(syllables))
                word.append(syllables[syllable])
            yield "".join(word)

    def build_facts(self) -> None:
        params = self.params
        for _ in range(params.critical_facts):
            fact = _Fact(
                subject="_".join(self.take_words(SUBJECT_WORDS)),
                predicate="_".join(self.take_words(PREDICATE_WORDS)),
                values=self.take_words(1),
                details=self.take_words(params.detail_words),
            )
            self._build_fact(fact)

    def _build_fact(self, fact: _Fact) -> None:
        params = self.params
        intro = self.rng.uniform(0, self.days * params.intro_share)
        value = fact.values[0]
        first = self.add(
            at=intro, kind=EventType.OBSERVE, text=fact.statement(value), category=Category.CRITICAL,
            canonical_query=fact.canonical_query, fact_key=fact.key, value=value,
        )
        statements = [first]
        overlap_only = self.rng.random() < params.overlap_share
        cursor = intro
        while True:
            if overlap_only:
                conflict_type = ConflictType.OVERLAP
            else:
                conflict_type = self.rng.choice([ConflictType.CONTRADICTION, ConflictType.UPDATE])
            cursor += self.rng.uniform(*CONFLICT_GAPS[conflict_type])
            if cursor >= self.days - 1:
                break
            if self.rng.random() >= params.conflict_rate:
                continue
            if conflict_type is not ConflictType.OVERLAP:
                value = self.take_words(1)[0]
                fact.values.append(value)
            conflict = self.add(
                at=cursor, kind=EventType.OBSERVE, category=Category.CRITICAL,
                text=fact.statement(value, detail=conflict_type is ConflictType.OVERLAP),
                conflict_type=conflict_type, target_key=statements[-1].key,
                canonical_query=fact.canonical_query, fact_key=fact.key, value=value,
            )
            statements.append(conflict)
            self._add_fact_query(fact, statements, cursor + params.post_conflict_delay, conflict.key)
            if conflict_type is ConflictType.OVERLAP:
                break
        query_at = intro + self.rng.uniform(params.requery_min_days, params.requery_max_days)
        while query_at < self.days:
            self._add_fact_query(fact, statements, query_at, None)
            query_at += self.rng.uniform(params.requery_min_days, params.requery_max_days)

    def _add_fact_query(self, fact: _Fact, statements: list[_Draft], at: float, conflict_key: int | None) -> None:
        known = [statement for statement in statements if statement.at < at]
        self.add(
            at=at, kind=EventType.QUERY, text=fact.canonical_query, category=Category.CRITICAL,
            relevant_keys=tuple(statement.key for statement in known), conflict_ref_key=conflict_key,
            fact_key=fact.key, value=known[-1].value,
        )

    def build_chatter(self) -> None:
        params = self.params
        vocabulary = self.take_words(CHATTER_VOCABULARY)
        for day in range(self.days):
            emitted = 0
            while emitted < params.chatter_per_day:
                at = day + self.rng.random()
                words = self.rng.sample(vocabulary, params.chatter_sentence_words)
                episode = (
                    self.rng.random() < params.episode_share
                    and emitted + params.episode_size <= params.chatter_per_day
                )
                self._add_chatter(words, at)
                emitted += 1
                if not episode:
                    continue
                for _ in range(params.episode_size - 1):
                    variant = list(words)
                    position = self.rng.randrange(len(variant))
                    variant[position] = self.rng.choice([word for word in vocabulary if word not in words])
                    self._add_chatter(variant, at + self.rng.uniform(0.01, params.episode_span_days))
                    emitted += 1

    def _add_chatter(self, words: list[str], at: float) -> None:
        if at >= self.days:
            return
        text = f"{' '.join(words).capitalize()}."
        observation = self.add(
            at=at, kind=EventType.OBSERVE, text=text, category=Category.CONTEXTUAL, canonical_query=text,
        )
        if self.rng.random() < self.params.chatter_requery_share:
            query_at = at + self.rng.uniform(1, 5)
            if query_at < self.days:
                self.add(
                    at=query_at, kind=EventType.QUERY, text=text, category=Category.CONTEXTUAL,
                    relevant_keys=(observation.key,),
                )

    def events(self) -> list[TraceEvent]:
        ordered = sorted(self.drafts, key=lambda draft: (draft.at, draft.key))
        ids = {draft.key: f"e{position:0{EVENT_ID_WIDTH}d}" for position, draft in enumerate(ordered, start=1)}
        return [self._event(draft, ids) for draft in ordered]

    @staticmethod
    def _event(draft: _Draft, ids: dict[int, str]) -> TraceEvent:
        conflict = None
        if draft.conflict_type is not None and draft.target_key is not None:
            conflict = ConflictLabel(
                type=draft.conflict_type,
                target_id=ids[draft.target_key],
                correct_strategy=CORRECT_STRATEGY[draft.conflict_type],
            )
        return TraceEvent(
            event_id=ids[draft.key],
            at=draft.at,
            kind=draft.kind,
            text=draft.text,
            labels=TraceLabels(
                category=draft.category,
                relevant_ids=tuple(ids[key] for key in draft.relevant_keys),
                conflict=conflict,
                conflict_ref=ids[draft.conflict_ref_key] if draft.conflict_ref_key is not None else None,
                canonical_query=draft.canonical_query if draft.kind is EventType.OBSERVE else None,
            ),
            fact_key=draft.fact_key,
            value=draft.value,
        )


def generate_trace(seed: int, days: int, params: TraceParams | None = None) -> list[TraceEvent]:
    """
    Generates a synthetic interaction trace.

    Args:
        seed (int): Seed of the pseudo-random generator; equal arguments give equal traces.
        days (int): Length of the run in virtual days.
        params (TraceParams | None): Trace shape; defaults when None.

    Returns:
        list[TraceEvent]: Events sorted by time.

    Raises:
        ValueError: If days < 1.
    """
    if days < 1:
        raise ValueError("a trace spans at least one day")
    builder = _TraceBuilder(seed, days, params or TraceParams())
    builder.build_facts()
    builder.build_chatter()
    return builder.events()
