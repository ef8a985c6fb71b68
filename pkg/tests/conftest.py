from collections.abc import Callable, Sequence
from typing import Any

import pytest

from core.config import EngineConfig
from core.exceptions import OracleError
from core.models import MemoryRecord, Timestamp
from embedding.embedding_provider import DeterministicEmbedder, deterministic_embed
from oracles.rule_oracle import RuleOracle

RecordFactory = Callable[..., MemoryRecord]


@pytest.fixture
def cfg() -> EngineConfig:
    return EngineConfig()


@pytest.fixture
def embedder() -> DeterministicEmbedder:
    return DeterministicEmbedder()


@pytest.fixture
def rule_oracle() -> RuleOracle:
    return RuleOracle()


@pytest.fixture
def make_record() -> RecordFactory:
    """Builds a record embedded with the deterministic embedder; anchor_time defaults to created_at."""

    def factory(content: str, record_id: str = "m000001", created_at: Timestamp = 0.0, **fields: Any) -> MemoryRecord:
        fields.setdefault("embedding", deterministic_embed(content))
        fields.setdefault("anchor_strength", 1.0)
        fields.setdefault("anchor_time", created_at)
        return MemoryRecord(id=record_id, content=content, created_at=created_at, **fields)

    return factory


class FailingOracle:
    """Oracle whose every call fails."""

    async def classify(self, text_a: str, text_b: str) -> Any:
        raise OracleError("classifier down")

    async def merge(self, texts: Sequence[str]) -> str:
        raise OracleError("merger down")

    async def preservation_score(self, sources: Sequence[str], merged: str) -> float:
        raise OracleError("verifier down")


@pytest.fixture
def failing_oracle() -> FailingOracle:
    return FailingOracle()
