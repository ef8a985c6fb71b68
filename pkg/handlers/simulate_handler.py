"""
This module provides the handler of the `simulate` sub-command.

Handlers:
    simulate_handler: Generates (or replays) a trace, runs the engine and the FIFO baseline, writes the
        metrics, the final snapshot and the trace into `--out`.
"""
import argparse
import logging
from pathlib import Path

from benchmark.benchmark_runner import run_ablation, run_benchmark, run_fifo_baseline
from benchmark.metrics import MetricsReport
from benchmark.report_writer import format_summary, write_report
from benchmark.trace_generator import generate_trace
from benchmark.trace_models import read_trace, write_trace
from core.exceptions import UsageError
from core.settings import get_remote_settings
from handlers.components import build_embedder, build_oracle, load_engine_config
from handlers.store_handlers import format_stats
from store.snapshot_manager import save_snapshot

logger = logging.getLogger(__name__)

SNAPSHOT_NAME = "snapshot.fmem"
TRACE_NAME = "trace.jsonl"


async def simulate_handler(args: argparse.Namespace) -> int:  # noqa: WPS210
    """
    Runs the benchmark end to end.

    A generated trace is scored at day `--days`; a replayed trace is scored at its last event, so the
    final store equals the one that exported it.

    Args:
        args (argparse.Namespace): Parsed `simulate` options.

    Returns:
        int: 0 on success.

    Raises:
        UsageError: If --days is below 1.
    """
    if args.days < 1:
        raise UsageError("--days must be at least 1")
    cfg = load_engine_config(args.config)
    settings = get_remote_settings()
    oracle = build_oracle(args, settings)
    embedder = build_embedder(args, settings)
    if args.replay:
        trace = await read_trace(args.replay)
        horizon = None
    else:
        trace = generate_trace(args.seed, args.days)
        horizon = float(args.days)
    logger.info("Running %d trace events", len(trace))

    run = await run_benchmark(
        trace, cfg, oracle, oracle, oracle, embedder, k_values=args.k, horizon=horizon,
    )
    reports: dict[str, MetricsReport] = {"fademem": run.report}
    reports["fifo"] = await run_fifo_baseline(trace, len(run.store), embedder, k_values=args.k, horizon=horizon)
    if args.ablation:
        ablations = await run_ablation(trace, cfg, oracle, oracle, oracle, embedder, k_values=args.k, horizon=horizon)
        reports.update({label: report for label, report in ablations.items() if label != "fademem"})

    out_dir = Path(args.out)
    await write_report(reports, out_dir)
    await save_snapshot(run.store, out_dir / SNAPSHOT_NAME)
    await write_trace(trace, out_dir / TRACE_NAME)
    print(format_summary(reports))
    print()
    print(format_stats(run.store.stats()))
    return 0
