"""
This module defines the bounded window of recent query embeddings used as the relevance context.

Classes:
    ContextWindow: Immutable, oldest-evicted-first list of recent query embeddings.
"""
from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.models import Embedding


class ContextWindow(BaseModel):
    """
    Recent query embeddings forming the relevance context of the importance score.

    Attributes:
        max_len (int): Maximum number of embeddings kept.
        embeddings (tuple[Embedding, ...]): Oldest first.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_len: int = Field(default=5, ge=1)
    embeddings: tuple[Embedding, ...] = ()

    @model_validator(mode="after")
    def _check_length(self) -> Self:
        if len(self.embeddings) > self.max_len:
            raise ValueError(f"context window holds {len(self.embeddings)} embeddings, limit is {self.max_len}")
        return self

    def push(self, embedding: Embedding) -> "ContextWindow":
        """Returns a new window with `embedding` appended and the oldest entries evicted."""
        kept = (*self.embeddings, embedding)[-self.max_len:]
        return ContextWindow(max_len=self.max_len, embeddings=kept)
