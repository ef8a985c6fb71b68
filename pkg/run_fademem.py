"""
This script is the command-line entry point of the FadeMem memory engine.

Functions:
    main(argv): Parses the command line, runs the selected handler and maps failures to exit codes.

Exit codes:
    0: success.
    1: usage error or clock regression.
    2: invalid config, snapshot or trace.
    3: oracle or embedder failure.

Usage:
    python run_fademem.py simulate --seed 0 --days 30 --out runs/seed0
    python run_fademem.py observe --store mem.fmem --text "alice|lives in|paris" --at 1
"""
import asyncio
import logging
import sys
from collections.abc import Sequence

from core.exceptions import (
    ClockRegressionError,
    ConfigError,
    EmbeddingError,
    OracleError,
    SnapshotError,
    TraceError,
    UsageError,
)
from core.settings import get_log_level
from handlers.cli_parser import build_parser

EXIT_CODES: tuple[tuple[type[Exception], int], ...] = (
    (UsageError, 1),
    (ClockRegressionError, 1),
    (ConfigError, 2),
    (SnapshotError, 2),
    (TraceError, 2),
    (OracleError, 3),
    (EmbeddingError, 3),
)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=get_log_level(), stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        return int(asyncio.run(args.handler(args)))
    except tuple(error_type for error_type, _ in EXIT_CODES) as error:
        print(f"error: {error}", file=sys.stderr)
        return next(code for error_type, code in EXIT_CODES if isinstance(error, error_type))


if __name__ == "__main__":
    sys.exit(main())
