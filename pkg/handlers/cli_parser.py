"""
This module builds the command-line parser.

Classes:
    CliArgumentParser: ArgumentParser that raises UsageError instead of exiting.

Functions:
    build_parser() -> CliArgumentParser:
        Parser with the simulate, observe, query, tick, stats and export sub-commands.

    parse_k_values(raw: str) -> tuple[int, ...]:
        "5,10" -> (5, 10).
"""
import argparse
from typing import NoReturn

from core.exceptions import UsageError
from handlers.simulate_handler import simulate_handler
from handlers.store_handlers import (
    export_handler,
    observe_handler,
    query_handler,
    stats_handler,
    tick_handler,
)

ORACLE_CHOICES = ("rule", "remote")
EMBEDDER_CHOICES = ("deterministic", "remote")


class CliArgumentParser(argparse.ArgumentParser):
    """Reports malformed invocations as UsageError so the entry script owns the exit code."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(message)


def parse_k_values(raw: str) -> tuple[int, ...]:
    """
    Parses a comma-separated list of positive cut-offs.

    Raises:
        argparse.ArgumentTypeError: If an entry is not a positive integer.
    """
    try:
        values = tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"invalid k list {raw!r}") from error
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("k values must be positive integers")
    return values


def _oracle_options() -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False)
    options.add_argument("--oracle", choices=ORACLE_CHOICES, default="rule")
    options.add_argument("--oracle-fixtures", default=None, help="replay recorded remote oracle exchanges from DIR")
    options.add_argument("--embedder", choices=EMBEDDER_CHOICES, default="deterministic")
    return options


def _store_options() -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False)
    options.add_argument("--store", required=True, help="snapshot file of the store")
    return options


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(prog="fademem", description="Adaptive-forgetting agent memory engine.")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliArgumentParser)
    oracle_options = _oracle_options()
    store_options = _store_options()

    simulate = subparsers.add_parser("simulate", parents=[oracle_options], help="run the synthetic benchmark")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--days", type=int, default=30)
    simulate.add_argument("--config", default=None)
    simulate.add_argument("--out", required=True)
    simulate.add_argument("--k", type=parse_k_values, default=(5, 10))
    simulate.add_argument("--replay", default=None, help="replay a trace file instead of generating one")
    simulate.add_argument("--ablation", action="store_true", help="also run with each component disabled")
    simulate.set_defaults(handler=simulate_handler)

    observe = subparsers.add_parser("observe", parents=[store_options, oracle_options], help="add a memory")
    observe.add_argument("--text", required=True)
    observe.add_argument("--at", type=float, default=None, help="virtual day, defaults to the store clock")
    observe.add_argument("--category", default=None)
    observe.add_argument("--config", default=None, help="config of a new store")
    observe.set_defaults(handler=observe_handler)

    query = subparsers.add_parser("query", parents=[store_options, oracle_options], help="retrieve memories")
    query.add_argument("--text", required=True)
    query.add_argument("--k", type=int, default=5)
    query.add_argument("--at", type=float, default=None)
    query.set_defaults(handler=query_handler)

    tick = subparsers.add_parser("tick", parents=[store_options], help="advance the virtual clock")
    tick.add_argument("--days", type=float, required=True)
    tick.set_defaults(handler=tick_handler)

    stats = subparsers.add_parser("stats", parents=[store_options], help="print store statistics")
    stats.set_defaults(handler=stats_handler)

    export = subparsers.add_parser("export", parents=[store_options], help="write the operation log as a trace")
    export.add_argument("--out", required=True)
    export.set_defaults(handler=export_handler)
    return parser
