import math

import numpy as np
import pytest

from core.exceptions import EmbeddingDimensionError, EmbeddingError
from embedding.embedding_provider import (
    DEFAULT_DIMENSION,
    DeterministicEmbedder,
    EmbeddingProvider,
    RemoteEmbedder,
    _extract_vector,
    cosine_similarity,
    deterministic_embed,
    fnv1a_64,
    normalize,
    similarity_scores,
    token_bucket,
    tokenize,
)


def test_tokenize_splits_on_punctuation_and_underscores() -> None:
    assert tokenize("Alice|likes_tea, TOAST!") == ["alice", "likes", "tea", "toast"]
    assert tokenize("  ...  ") == []


def test_fnv1a_reference_values() -> None:
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C


def test_cosine_similarity_identity_and_orthogonality() -> None:
    vector = deterministic_embed("alice likes green tea")

    assert cosine_similarity(vector, vector) == pytest.approx(1.0, abs=1e-6)
    assert cosine_similarity((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)) == 0.0


def test_cosine_similarity_matches_plain_dot_product() -> None:
    rng = np.random.default_rng(3)
    for _ in range(50):
        first = normalize(rng.normal(size=64))
        second = normalize(rng.normal(size=64))
        expected = math.fsum(left * right for left, right in zip(first, second))
        assert cosine_similarity(first, second) == pytest.approx(expected, abs=1e-9)
        assert cosine_similarity(first, second) == cosine_similarity(second, first)


def test_cosine_similarity_rejects_mixed_dimensions() -> None:
    with pytest.raises(EmbeddingDimensionError):
        cosine_similarity((1.0, 0.0), (1.0, 0.0, 0.0))
    with pytest.raises(EmbeddingError):
        cosine_similarity((1.0, 0.0), (1.0, 0.0, 0.0))


def test_similarity_scores_agree_with_pairwise_cosine() -> None:
    texts = ["alice likes tea", "bob likes coffee", "alice drinks tea daily", "unrelated words here"]
    embeddings = [deterministic_embed(text) for text in texts]
    query = deterministic_embed("alice tea")

    scores = similarity_scores(query, embeddings)

    assert scores.shape == (len(texts),)
    for score, embedding in zip(scores, embeddings):
        assert float(score) == pytest.approx(cosine_similarity(query, embedding), abs=1e-12)
    assert similarity_scores(query, []).size == 0
    with pytest.raises(EmbeddingDimensionError):
        similarity_scores(query, [deterministic_embed("alice", dimension=8)])


async def test_deterministic_embedder_is_deterministic(embedder: DeterministicEmbedder) -> None:
    first = await embedder.embed("The quick brown fox")
    second = await embedder.embed("The quick brown fox")

    assert first == second
    assert len(first) == embedder.dimension() == DEFAULT_DIMENSION
    assert isinstance(embedder, EmbeddingProvider)


async def test_repetition_does_not_change_direction(embedder: DeterministicEmbedder) -> None:
    repeated = await embedder.embed("alpha alpha")
    single = await embedder.embed("alpha")

    assert cosine_similarity(repeated, single) == pytest.approx(1.0, abs=1e-6)


def test_texts_in_disjoint_buckets_are_orthogonal() -> None:
    first_tokens = ["w0", "w1"]
    taken = {token_bucket(token, DEFAULT_DIMENSION) for token in first_tokens}
    second_tokens = []
    candidate = 2
    while len(second_tokens) < 2:
        token = f"w{candidate}"
        bucket = token_bucket(token, DEFAULT_DIMENSION)
        if bucket not in taken:
            second_tokens.append(token)
            taken.add(bucket)
        candidate += 1

    similarity = cosine_similarity(deterministic_embed(" ".join(first_tokens)), deterministic_embed(" ".join(second_tokens)))

    assert similarity == 0.0


def test_embeddings_are_unit_norm_and_float32_exact() -> None:
    embedding = deterministic_embed("Float thirty two values survive a round trip")

    assert math.sqrt(math.fsum(component * component for component in embedding)) == pytest.approx(1.0, abs=1e-6)
    assert all(float(np.float32(component)) == component for component in embedding)


@pytest.mark.parametrize("text", ["", "   ", "!!! ???"])
async def test_texts_without_tokens_cannot_be_embedded(embedder: DeterministicEmbedder, text: str) -> None:
    with pytest.raises(EmbeddingError):
        await embedder.embed(text)


def test_normalize_rejects_degenerate_vectors() -> None:
    with pytest.raises(EmbeddingError):
        normalize([0.0, 0.0])
    with pytest.raises(EmbeddingError):
        normalize([])
    with pytest.raises(EmbeddingError):
        normalize([1.0, float("nan")])


def test_remote_embedder_requires_endpoint() -> None:
    with pytest.raises(EmbeddingError, match="FADEMEM_EMBED_URL"):
        RemoteEmbedder("", "", dimension=4)


def test_remote_response_shapes() -> None:
    assert _extract_vector({"embedding": [1, 2]}) == [1.0, 2.0]
    assert _extract_vector({"data": [{"embedding": [0.5]}]}) == [0.5]
    with pytest.raises(EmbeddingError):
        _extract_vector({"vectors": []})
