"""
This module writes benchmark reports.

Functions:
    flatten_report(report: MetricsReport) -> dict[str, float | int | None]:
        One scalar per metric, nested maps expanded into prefixed keys.

    write_report(reports, out_dir) -> None:
        metrics.json (reports keyed by run label) and metrics.csv (run,metric,value rows).

    format_summary(reports) -> str:
        Plain-text table, one column per run.
"""
import csv
import io
import json
from collections.abc import Mapping
from pathlib import Path

import aiofiles

from benchmark.metrics import MetricsReport

METRICS_JSON = "metrics.json"
METRICS_CSV = "metrics.csv"
SUMMARY_METRICS = (
    "srr",
    "retention_critical",
    "retention_contextual",
    "tcs",
    "conflict_accuracy_macro",
    "conflict_consistency_macro",
    "promotion_rate",
    "count_observed",
    "count_retained",
    "count_conflicts",
)


def flatten_report(report: MetricsReport) -> dict[str, float | int | None]:
    flat: dict[str, float | int | None] = {
        "srr": report.srr,
        "tcs": report.tcs,
        "retention_critical": report.retention_critical,
        "retention_contextual": report.retention_contextual,
        "conflict_accuracy_macro": report.conflict_accuracy_macro,
        "conflict_consistency_macro": report.conflict_consistency_macro,
        "promotion_rate": report.promotion_rate,
    }
    flat.update({f"rp_at_{k}": value for k, value in sorted(report.rp_at_k.items())})
    flat.update({f"conflict_accuracy_{kind}": value for kind, value in report.conflict_accuracy.items()})
    flat.update({f"conflict_consistency_{kind}": value for kind, value in report.conflict_consistency.items()})
    flat.update({f"count_{name}": value for name, value in report.counts.items()})
    return flat


def _csv_text(reports: Mapping[str, MetricsReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["run", "metric", "value"])
    for label, report in reports.items():
        for metric, value in flatten_report(report).items():
            writer.writerow([label, metric, "" if value is None else value])
    return buffer.getvalue()


async def write_report(reports: Mapping[str, MetricsReport], out_dir: str | Path) -> None:
    """
    Writes metrics.json and metrics.csv into `out_dir`, creating it if needed.

    Both files are deterministic for equal reports.
    """
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    document = {label: report.model_dump(mode="json") for label, report in reports.items()}
    async with aiofiles.open(directory / METRICS_JSON, "w", encoding="utf-8") as json_file:
        await json_file.write(json.dumps(document, indent=2, sort_keys=True))
        await json_file.write("\n")
    async with aiofiles.open(directory / METRICS_CSV, "w", encoding="utf-8", newline="") as csv_file:
        await csv_file.write(_csv_text(reports))


def _cell(value: float | int | None) -> str:
    if value is None:
        return "-"
    if isinstance(value, int):
        return str(value)
    return f"{value:.3f}"


def format_summary(reports: Mapping[str, MetricsReport]) -> str:
    """One row per metric, one column per run."""
    flattened = {label: flatten_report(report) for label, report in reports.items()}
    metrics = [*SUMMARY_METRICS, *sorted(key for key in next(iter(flattened.values()), {}) if key.startswith("rp_at_"))]
    width = max(len(metric) for metric in metrics) + 2
    lines = ["metric".ljust(width) + "".join(label.rjust(12) for label in flattened)]
    for metric in metrics:
        cells = "".join(_cell(flat.get(metric)).rjust(12) for flat in flattened.values())
        lines.append(metric.ljust(width) + cells)
    return "\n".join(lines)
