"""
This module provides the handlers of the sub-commands that operate on a saved store.

Every handler holds the store lock for its whole run, loads the snapshot, applies one operation and
saves the snapshot back when the operation mutated the store.

Handlers:
    observe_handler: Adds one memory, creating the store when the snapshot does not exist yet.
    query_handler: Retrieves and consolidates the top-k memories.
    tick_handler: Advances the virtual clock.
    stats_handler: Prints layer counts, the strength histogram and the storage reduction.
    export_handler: Writes the operation log as a replayable trace.

Helper Functions:
    format_stats: Renders StoreStats as plain text.
"""
import argparse
import logging
from pathlib import Path

from benchmark.trace_models import trace_from_event_log, write_trace
from core.exceptions import UsageError
from core.settings import get_remote_settings
from handlers.components import build_embedder, build_oracle, load_engine_config
from handlers.store_lock import store_lock
from store.memory_store import MemoryStore, StoreStats
from store.snapshot_manager import load_snapshot, save_snapshot

logger = logging.getLogger(__name__)


def format_stats(stats: StoreStats) -> str:
    lines = [
        f"clock      {stats.clock:.3f}",
        f"memories   {stats.total}",
        *(f"  {layer:<8} {count}" for layer, count in stats.per_layer.items()),
        f"fused      {stats.fused}",
        f"observed   {stats.observed}",
        f"srr        {stats.srr:.3f}",
        "strength histogram",
    ]
    edges = stats.histogram_edges
    for index, count in enumerate(stats.strength_histogram):
        lines.append(f"  [{edges[index]:.1f}, {edges[index + 1]:.1f})  {count}")
    return "\n".join(lines)


async def _open_store(args: argparse.Namespace, create: bool = False) -> MemoryStore:
    settings = get_remote_settings()
    embedder = build_embedder(args, settings) if hasattr(args, "embedder") else None
    oracle = build_oracle(args, settings) if hasattr(args, "oracle") else None
    if create and not Path(args.store).exists():
        logger.info("Creating store %s", args.store)
        return MemoryStore(
            load_engine_config(args.config), embedder=embedder, classifier=oracle, merger=oracle, verifier=oracle,
        )
    return await load_snapshot(args.store, embedder=embedder, classifier=oracle, merger=oracle, verifier=oracle)


async def observe_handler(args: argparse.Namespace) -> int:
    """
    Adds `--text` to the store at `--at` (the store clock when omitted).

    Raises:
        UsageError: If the text is blank.
    """
    if not args.text.strip():
        raise UsageError("--text must not be empty")
    with store_lock(args.store):
        store = await _open_store(args, create=True)
        now = store.clock if args.at is None else args.at
        result = await store.observe(args.text, now, args.category)
        await save_snapshot(store, args.store)
    state = "stored as" if result.inserted else "absorbed into"
    print(f"{state} {result.record_id}")
    for record_id, relation in sorted((result.resolution.applied if result.resolution else {}).items()):
        print(f"  {relation.value} -> {record_id}")
    return 0


async def query_handler(args: argparse.Namespace) -> int:
    """Prints rank, id, score, strength, layer and content of each result."""
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    with store_lock(args.store):
        store = await _open_store(args)
        now = store.clock if args.at is None else args.at
        results = await store.query(args.text, args.k, now)
        await save_snapshot(store, args.store)
    for rank, scored in enumerate(results, start=1):
        record = scored.record
        print(f"{rank}\t{record.id}\t{scored.score:.4f}\t{scored.strength:.4f}\t{record.layer.value}\t{record.content}")
    return 0


async def tick_handler(args: argparse.Namespace) -> int:
    if args.days < 0:
        raise UsageError("--days must not be negative")
    with store_lock(args.store):
        store = await _open_store(args)
        removed = await store.tick(store.clock + args.days)
        await save_snapshot(store, args.store)
    print(f"clock {store.clock:.3f}, removed {len(removed)}")
    return 0


async def stats_handler(args: argparse.Namespace) -> int:
    with store_lock(args.store):
        store = await _open_store(args)
    print(format_stats(store.stats()))
    return 0


async def export_handler(args: argparse.Namespace) -> int:
    with store_lock(args.store):
        store = await _open_store(args)
    trace = trace_from_event_log(store.event_log.events())
    await write_trace(trace, args.out)
    print(f"exported {len(trace)} events to {args.out}")
    return 0
