"""
This module saves and loads store snapshots.

Layout, little-endian:
    magic            8 bytes  b"FADEMEM1"
    version          u32
    6 blocks, each   u64 length + payload:
        config       JSON
        meta         JSON {clock, next_id, dimension, record_count, context_max_len, context_count}
        records      JSON list of records without embeddings
        record vecs  record_count x dimension float32
        context vecs context_count x dimension float32
        event log    JSON list of events
    checksum         8-byte blake2b digest of every preceding byte

Functions:
    encode_snapshot(store: MemoryStore) -> bytes
    decode_snapshot(payload: bytes, ...) -> MemoryStore
    save_snapshot(store: MemoryStore, path: str | Path) -> None
    load_snapshot(path: str | Path, ...) -> MemoryStore
"""
import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Any

import aiofiles
import aiofiles.os
import numpy as np
from pydantic import ValidationError

from core.config import EngineConfig, dump_config, validate_config
from core.exceptions import (
    ConfigError,
    SnapshotCorruptError,
    SnapshotError,
    SnapshotSchemaError,
    SnapshotVersionError,
)
from core.models import Embedding, MemoryRecord
from dynamics.context_window import ContextWindow
from embedding.embedding_provider import EmbeddingProvider
from oracles.oracle_protocols import MergeOracle, PreservationOracle, RelationOracle
from store.event_log import StoreEvent
from store.memory_store import MemoryStore

logger = logging.getLogger(__name__)

MAGIC = b"FADEMEM1"
FORMAT_VERSION = 1
CHECKSUM_SIZE = 8
BLOCK_COUNT = 6
VERSION_STRUCT = struct.Struct("<I")
LENGTH_STRUCT = struct.Struct("<Q")
FLOAT_DTYPE = np.dtype("<f4")


def _json_bytes(document: Any) -> bytes:
    return json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _vector_bytes(embeddings: list[Embedding], dimension: int) -> bytes:
    if not embeddings:
        return b""
    return np.asarray(embeddings, dtype=FLOAT_DTYPE).reshape(len(embeddings), dimension).tobytes()


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=CHECKSUM_SIZE).digest()


def encode_snapshot(store: MemoryStore) -> bytes:
    """Serializes the full store state, deterministic for equal stores."""
    records = store.records
    context = store.context
    dimensions = {len(embedding) for embedding in (*(rec.embedding for rec in records), *context.embeddings)}
    if len(dimensions) > 1:
        raise SnapshotSchemaError(f"store mixes embedding dimensions {sorted(dimensions)}")
    dimension = dimensions.pop() if dimensions else 0
    meta = {
        "clock": store.clock,
        "next_id": store.ids.next_value,
        "dimension": dimension,
        "record_count": len(records),
        "context_max_len": context.max_len,
        "context_count": len(context.embeddings),
    }
    blocks = [
        _json_bytes(dump_config(store.config)),
        _json_bytes(meta),
        _json_bytes([record.model_dump(mode="json", exclude={"embedding"}) for record in records]),
        _vector_bytes([record.embedding for record in records], dimension),
        _vector_bytes(list(context.embeddings), dimension),
        _json_bytes([event.model_dump(mode="json") for event in store.event_log]),
    ]
    body = bytearray(MAGIC)
    body.extend(VERSION_STRUCT.pack(FORMAT_VERSION))
    for block in blocks:
        body.extend(LENGTH_STRUCT.pack(len(block)))
        body.extend(block)
    return bytes(body) + _checksum(bytes(body))


def _split_blocks(payload: bytes) -> list[bytes]:
    minimum = len(MAGIC) + VERSION_STRUCT.size + CHECKSUM_SIZE
    if len(payload) < minimum or not payload.startswith(MAGIC):
        raise SnapshotCorruptError("not a snapshot file or truncated header")
    body, checksum = payload[:-CHECKSUM_SIZE], payload[-CHECKSUM_SIZE:]
    if _checksum(body) != checksum:
        raise SnapshotCorruptError("snapshot checksum mismatch")
    (version,) = VERSION_STRUCT.unpack_from(body, len(MAGIC))
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(f"snapshot format version {version}, this build reads {FORMAT_VERSION}")
    offset = len(MAGIC) + VERSION_STRUCT.size
    blocks = []
    for _ in range(BLOCK_COUNT):
        if offset + LENGTH_STRUCT.size > len(body):
            raise SnapshotCorruptError("snapshot ends inside a block header")
        (length,) = LENGTH_STRUCT.unpack_from(body, offset)
        offset += LENGTH_STRUCT.size
        if offset + length > len(body):
            raise SnapshotCorruptError("snapshot ends inside a block")
        blocks.append(body[offset:offset + length])
        offset += length
    if offset != len(body):
        raise SnapshotCorruptError("trailing bytes after the last block")
    return blocks


def _vectors(block: bytes, count: int, dimension: int) -> list[Embedding]:
    if len(block) != count * dimension * FLOAT_DTYPE.itemsize:
        raise SnapshotSchemaError(f"vector block holds {len(block)} bytes, expected {count} x {dimension} floats")
    if count == 0:
        return []
    matrix = np.frombuffer(block, dtype=FLOAT_DTYPE).reshape(count, dimension)
    return [tuple(float(component) for component in row) for row in matrix]


def decode_snapshot(  # noqa: WPS210
    payload: bytes,
    embedder: EmbeddingProvider | None = None,
    classifier: RelationOracle | None = None,
    merger: MergeOracle | None = None,
    verifier: PreservationOracle | None = None,
) -> MemoryStore:
    """
    Rebuilds a store from snapshot bytes; the embedded config governs, not ambient defaults.

    Raises:
        SnapshotCorruptError: Truncated payload, wrong magic or checksum mismatch.
        SnapshotVersionError: Another format version.
        SnapshotSchemaError: Well-formed container whose content is not a valid store.
    """
    config_block, meta_block, records_block, record_vectors, context_vectors, events_block = _split_blocks(payload)
    try:
        config = validate_config(EngineConfig.model_validate(json.loads(config_block)))
        meta = json.loads(meta_block)
        dimension = int(meta["dimension"])
        clock = float(meta["clock"])
        next_id = int(meta["next_id"])
        raw_records = json.loads(records_block)
        embeddings = _vectors(record_vectors, int(meta["record_count"]), dimension)
        if len(raw_records) != len(embeddings):
            raise SnapshotSchemaError("record count does not match the vector block")
        records = [
            MemoryRecord.model_validate({**raw, "embedding": embedding})
            for raw, embedding in zip(raw_records, embeddings, strict=True)
        ]
        context = ContextWindow(
            max_len=int(meta["context_max_len"]),
            embeddings=tuple(_vectors(context_vectors, int(meta["context_count"]), dimension)),
        )
        events = [StoreEvent.model_validate(raw) for raw in json.loads(events_block)]
    except SnapshotError:
        raise
    except (ValidationError, ConfigError, KeyError, TypeError, ValueError) as error:
        raise SnapshotSchemaError(f"snapshot content is invalid: {error}") from error
    if embedder is not None and dimension and embedder.dimension() != dimension:
        raise SnapshotSchemaError(f"snapshot embeddings have dimension {dimension}, embedder has {embedder.dimension()}")
    store = MemoryStore(config, embedder=embedder, classifier=classifier, merger=merger, verifier=verifier)
    store.restore(records, clock, context, events, next_id)
    return store


async def save_snapshot(store: MemoryStore, path: str | Path) -> None:
    """Writes the snapshot next to `path` and renames it into place."""
    target = Path(path)
    temporary = target.with_name(f"{target.name}.tmp")
    async with aiofiles.open(temporary, "wb") as snapshot_file:
        await snapshot_file.write(encode_snapshot(store))
    await aiofiles.os.replace(temporary, target)
    logger.info("Saved %d memories to %s", len(store), target)


async def load_snapshot(
    path: str | Path,
    embedder: EmbeddingProvider | None = None,
    classifier: RelationOracle | None = None,
    merger: MergeOracle | None = None,
    verifier: PreservationOracle | None = None,
) -> MemoryStore:
    """
    Reads a snapshot file.

    Raises:
        SnapshotCorruptError: If the file is missing, truncated or fails its checksum.
        SnapshotVersionError: If it was written by another format version.
        SnapshotSchemaError: If its content is not a valid store.
    """
    try:
        async with aiofiles.open(path, "rb") as snapshot_file:
            payload = await snapshot_file.read()
    except FileNotFoundError as error:
        raise SnapshotCorruptError(f"snapshot {path} does not exist") from error
    return decode_snapshot(payload, embedder, classifier, merger, verifier)
