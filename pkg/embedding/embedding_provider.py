"""
This module turns text into unit-norm vectors and compares them.

Classes:
    EmbeddingProvider (Protocol): async embed(text) and dimension().
    DeterministicEmbedder: Offline token-hash embedder, stateless and thread-safe.
    RemoteEmbedder: POSTs {"input": text} to an HTTPS endpoint with aiohttp.

Functions:
    tokenize(text: str) -> list[str]:
        Lowercased alphanumeric runs.

    fnv1a_64(payload: bytes) -> int:
        64-bit FNV-1a hash.

    deterministic_embed(text: str, dimension: int = 256) -> Embedding:
        Bag-of-hashed-tokens vector, l2-normalized.

    normalize(values) -> Embedding:
        l2-normalizes a vector and rounds it to float32-representable values.

    as_vector(embedding: Embedding) -> np.ndarray:
        Read-only float64 array for an embedding (memoized by value).

    embedding_matrix(embeddings) -> np.ndarray:
        Stacks embeddings into an (n, dim) matrix.

    similarity_scores(query: Embedding, embeddings) -> np.ndarray:
        Cosine similarity of one vector against many.

    cosine_similarity(a: Embedding, b: Embedding) -> float:
        Dot product of two unit vectors, clipped to [-1, 1].
"""
import logging
import re
from collections.abc import Iterable, Sequence
from functools import lru_cache
from typing import Protocol, runtime_checkable

import aiohttp
import numpy as np

from core.exceptions import EmbeddingDimensionError, EmbeddingError
from core.models import Embedding

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 256
FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
UINT64_MASK = 0xFFFFFFFFFFFFFFFF

_TOKEN_PATTERN = re.compile(r"[^\W_]+")


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Capability interface for text-to-vector providers."""

    async def embed(self, text: str) -> Embedding:
        """Embeds one text into a unit-norm vector."""
        ...  # noqa: WPS428

    def dimension(self) -> int:
        """Length of every vector this provider returns."""
        ...  # noqa: WPS428


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; underscores and punctuation separate tokens."""
    return _TOKEN_PATTERN.findall(text.lower())


def fnv1a_64(payload: bytes) -> int:
    """64-bit FNV-1a hash of `payload`."""
    hash_value = FNV_OFFSET_BASIS
    for byte in payload:
        hash_value ^= byte
        hash_value = (hash_value * FNV_PRIME) & UINT64_MASK
    return hash_value


@lru_cache(maxsize=65536)
def token_bucket(token: str, dimension: int) -> int:
    """Bucket index of a token for a given dimension."""
    return fnv1a_64(token.encode("utf-8")) % dimension


def normalize(values: Sequence[float] | np.ndarray) -> Embedding:
    """
    l2-normalizes a vector and rounds every component to a float32-representable value.

    Args:
        values (Sequence[float] | np.ndarray): Raw vector.

    Returns:
        Embedding: Unit-norm tuple whose values survive a float32 round trip unchanged.

    Raises:
        EmbeddingError: If the vector is empty, non-finite or all zeros.
    """
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim != 1 or vector.size == 0:
        raise EmbeddingError("embedding must be a non-empty 1-D vector")
    if not np.all(np.isfinite(vector)):
        raise EmbeddingError("embedding has non-finite components")
    norm = float(np.linalg.norm(vector))
    if norm == 0:
        raise EmbeddingError("embedding is the zero vector")
    rounded = (vector / norm).astype(np.float32)
    return tuple(float(component) for component in rounded)


def deterministic_embed(text: str, dimension: int = DEFAULT_DIMENSION) -> Embedding:
    """
    Offline embedder: every token increments its FNV-1a bucket, then the vector is normalized.

    Args:
        text (str): Non-empty text.
        dimension (int): Vector length.

    Returns:
        Embedding: Unit-norm bag-of-hashed-tokens vector.

    Raises:
        EmbeddingError: If the text is empty or has no alphanumeric token.
    """
    if not text or not text.strip():
        raise EmbeddingError("cannot embed empty text")
    tokens = tokenize(text)
    if not tokens:
        raise EmbeddingError(f"text has no alphanumeric token: {text!r}")
    counts = np.zeros(dimension, dtype=np.float64)
    for token in tokens:
        counts[token_bucket(token, dimension)] += 1
    return normalize(counts)


@lru_cache(maxsize=8192)
def as_vector(embedding: Embedding) -> np.ndarray:
    """Read-only float64 array for an embedding; memoized by value so repeated scans stay cheap."""
    vector = np.asarray(embedding, dtype=np.float64)
    vector.flags.writeable = False
    return vector


def embedding_matrix(embeddings: Iterable[Embedding]) -> np.ndarray:
    """
    Stacks embeddings into an (n, dim) matrix.

    Raises:
        EmbeddingDimensionError: If the embeddings differ in length.
    """
    vectors = [as_vector(embedding) for embedding in embeddings]
    if not vectors:
        return np.empty((0, 0), dtype=np.float64)
    dimensions = {vector.shape[0] for vector in vectors}
    if len(dimensions) > 1:
        raise EmbeddingDimensionError(f"embeddings have mixed dimensions {sorted(dimensions)}")
    return np.stack(vectors)


def similarity_scores(query: Embedding, embeddings: Sequence[Embedding]) -> np.ndarray:
    """
    Cosine similarity of `query` against every embedding, in input order.

    Raises:
        EmbeddingDimensionError: If any dimension differs from the query's.
    """
    if not embeddings:
        return np.empty(0, dtype=np.float64)
    matrix = embedding_matrix(embeddings)
    if matrix.shape[1] != len(query):
        raise EmbeddingDimensionError(f"dimension mismatch: {len(query)} != {matrix.shape[1]}")
    return np.clip(matrix @ as_vector(query), -1, 1)


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """
    Cosine similarity of two unit vectors.

    Args:
        a (Embedding): Normalized vector.
        b (Embedding): Normalized vector of the same dimension.

    Returns:
        float: Dot product clipped to [-1, 1]; symmetric in its arguments.

    Raises:
        EmbeddingDimensionError: If the dimensions differ.
    """
    if len(a) != len(b):
        raise EmbeddingDimensionError(f"dimension mismatch: {len(a)} != {len(b)}")
    return float(np.clip(np.dot(as_vector(a), as_vector(b)), -1, 1))


class DeterministicEmbedder:
    """Stateless offline provider around `deterministic_embed`."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self._dimension = dimension

    async def embed(self, text: str) -> Embedding:
        return deterministic_embed(text, self._dimension)

    def dimension(self) -> int:
        return self._dimension


class RemoteEmbedder:
    """
    Remote provider: POSTs {"input": text} and normalizes the returned vector.

    Accepts either {"embedding": [...]} or {"data": [{"embedding": [...]}]} response bodies.
    """

    def __init__(
        self,
        url: str,
        api_key: str,
        dimension: int,
        timeout_seconds: float = 30.0,
        session: aiohttp.ClientSession | None = None,
    ) -> None:
        if not url:
            raise EmbeddingError("remote embedder needs an endpoint URL (FADEMEM_EMBED_URL)")
        self._url = url
        self._api_key = api_key
        self._dimension = dimension
        self._timeout = aiohttp.ClientTimeout(total=timeout_seconds)
        self._session = session

    async def embed(self, text: str) -> Embedding:
        if not text or not text.strip():
            raise EmbeddingError("cannot embed empty text")
        headers = {"Authorization": f"Bearer {self._api_key}"} if self._api_key else {}
        try:
            if self._session is not None:
                body = await self._post(self._session, text, headers)
            else:
                async with aiohttp.ClientSession(timeout=self._timeout) as session:
                    body = await self._post(session, text, headers)
        except (aiohttp.ClientError, TimeoutError) as error:
            raise EmbeddingError(f"embedding request failed: {error}") from error
        values = _extract_vector(body)
        if len(values) != self._dimension:
            raise EmbeddingDimensionError(f"remote embedder returned {len(values)} values, expected {self._dimension}")
        return normalize(values)

    def dimension(self) -> int:
        return self._dimension

    async def _post(self, session: aiohttp.ClientSession, text: str, headers: dict[str, str]) -> object:
        async with session.post(self._url, json={"input": text}, headers=headers, timeout=self._timeout) as response:
            if response.status >= 400:
                raise EmbeddingError(f"embedding endpoint answered HTTP {response.status}")
            return await response.json(content_type=None)


def _extract_vector(body: object) -> list[float]:
    if isinstance(body, dict):
        if isinstance(body.get("embedding"), list):
            return [float(component) for component in body["embedding"]]
        data = body.get("data")
        if isinstance(data, list) and data and isinstance(data[0], dict) and isinstance(data[0].get("embedding"), list):
            return [float(component) for component in data[0]["embedding"]]
    logger.warning("Unrecognised embedding response shape: %s", type(body).__name__)
    raise EmbeddingError("embedding response has no vector")
