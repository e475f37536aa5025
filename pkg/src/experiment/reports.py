#!/usr/bin/env python3
"""
Analytic CIL - Reports
Human-readable summaries and per-phase CSV tables of saved reports.
"""
from typing import Any, Dict, List, Optional, Sequence, TextIO
import json
import logging
import os
import sys

import pandas as pd

from src.core.errors import FormatError, ValidationError
from src.utils.helpers import describe_accuracy, format_bytes

logger = logging.getLogger(__name__)

PHASE_COLUMNS = ["phase", "n_train", "n_test", "A", "A_base", "seconds"]


def load_report(path: str) -> Dict[str, Any]:
    """
    Read a report JSON file.

    Raises:
        FormatError: the file is missing, is not valid JSON or lacks the report fields.
    """
    try:
        with open(path, "r") as f:
            payload = json.load(f)
    except OSError as e:
        raise FormatError(f"cannot read report: {e.strerror}", path) from e
    except json.JSONDecodeError as e:
        raise FormatError(f"corrupt report JSON: {e.msg} at line {e.lineno}", path) from e
    if not isinstance(payload, dict) or "schema_version" not in payload:
        raise FormatError("not a report (schema_version missing)", path)
    if payload.get("kind", "run") == "run" and "phases" not in payload:
        raise FormatError("run report has no phases", path)
    if payload.get("kind") == "repeat" and "runs" not in payload:
        raise FormatError("repeat report has no runs", path)
    return payload


def phase_table(report: Dict[str, Any]) -> pd.DataFrame:
    """
    Per-phase accuracy table; repeated runs get a leading ``seed`` column.

    Returns:
        One row per phase (per seed for repeated runs).
    """
    kind = report.get("kind", "run")
    if kind == "run":
        table = pd.DataFrame(report["phases"])
        return table[[c for c in PHASE_COLUMNS if c in table.columns]]
    if kind == "repeat":
        frames = []
        for seed, run in zip(report["seeds"], report["runs"]):
            frame = phase_table(run)
            frame.insert(0, "seed", seed)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)
    raise ValidationError(f"no phase table for a {kind!r} report")


def summary_lines(report: Dict[str, Any]) -> List[str]:
    """Short text summary of a run or repeat report."""
    kind = report.get("kind", "run")
    if kind == "repeat":
        summary = report["summary"]
        acc = summary["average_accuracy"]
        forgetting = summary["forgetting"]
        return [
            f"Seeds: {', '.join(str(s) for s in report['seeds'])}",
            f"Average incremental accuracy: {acc['mean'] * 100:.2f}% +/- {acc['std'] * 100:.2f}",
            f"Forgetting rate: {forgetting['mean'] * 100:.2f} +/- {forgetting['std'] * 100:.2f}",
        ]
    if kind == "verify":
        comparison = report["comparison"]
        return [
            f"Phases: {report['phases']}",
            f"Max |W_joint - W_rec|: {comparison['max_abs']:.3e} (tolerance {comparison['tolerance']:.1e})",
            f"Result: {'passed' if comparison['passed'] else 'FAILED'}",
        ]
    memory = report.get("memory", {})
    lines = [
        f"Phases: {len(report['phases']) - 1} incremental after the base phase",
        f"Average incremental accuracy: {describe_accuracy(report['average_accuracy'])}",
        f"Forgetting rate: {report['forgetting']['signed'] * 100:.2f} "
        f"(magnitude {report['forgetting']['magnitude'] * 100:.2f})",
    ]
    if memory:
        lines.append(f"State size: {format_bytes(memory['state_bytes'])} "
                     f"(replay buffer equivalent {format_bytes(memory['replay_bytes'])})")
    return lines


def diff_table(left: Dict[str, Any], right: Dict[str, Any]) -> pd.DataFrame:
    """
    Side-by-side comparison of two run reports.

    Rows are the per-phase A values followed by the average accuracy and the
    forgetting rate; ``delta`` is right minus left.
    """
    for report in (left, right):
        if report.get("kind", "run") != "run":
            raise ValidationError("only run reports can be compared")
    a = pd.DataFrame(left["phases"]).set_index("phase")["A"]
    b = pd.DataFrame(right["phases"]).set_index("phase")["A"]
    table = pd.concat([a.rename("left"), b.rename("right")], axis=1)
    table.index = [f"A_{k}" for k in table.index]
    totals = pd.DataFrame(
        {"left": [left["average_accuracy"], left["forgetting"]["signed"]],
         "right": [right["average_accuracy"], right["forgetting"]["signed"]]},
        index=["average_accuracy", "forgetting"])
    table = pd.concat([table, totals])
    table["delta"] = table["right"] - table["left"]
    table.index.name = "metric"
    return table


def default_csv_path(report_path: str) -> str:
    stem, _ = os.path.splitext(report_path)
    return f"{stem}_phases.csv"


def cmd_report(paths: Sequence[str], csv_out: Optional[str] = None,
               stream: TextIO = sys.stdout) -> pd.DataFrame:
    """
    Print a report summary and write its per-phase CSV.

    With two paths, print a side-by-side diff table instead; the CSV is then
    only written when ``csv_out`` is given.

    Args:
        paths: one or two report files.
        csv_out: CSV destination; defaults to ``<report>_phases.csv`` for one report.
        stream: where the human-readable output goes.

    Returns:
        The printed table.
    """
    if len(paths) not in (1, 2):
        raise ValidationError("report takes one or two report paths")
    reports = [load_report(path) for path in paths]

    if len(reports) == 2:
        table = diff_table(reports[0], reports[1])
        print(f"Left:  {paths[0]}", file=stream)
        print(f"Right: {paths[1]}", file=stream)
        print(table.to_string(float_format=lambda v: f"{v:.4f}"), file=stream)
        if csv_out:
            table.to_csv(csv_out)
            logger.info("Wrote %s", csv_out)
        return table

    report = reports[0]
    for line in summary_lines(report):
        print(line, file=stream)
    if report.get("kind") == "verify":
        return pd.DataFrame([report["comparison"]])
    table = phase_table(report)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"), file=stream)
    target = csv_out or default_csv_path(paths[0])
    table.to_csv(target, index=False)
    logger.info("Wrote %s", target)
    return table
