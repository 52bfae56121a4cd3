"""Serialization of check reports: delimited JSON, CSV, and SVG figures.

The JSON form is newline-delimited: one object per report, then a single
summary object.  Floats are printed with 17 significant digits so parsing
the file reproduces every value bit for bit, and the writer walks dicts
in insertion order, which makes the bytes a pure function of the report
list — reruns and parallel runs of the same scenario diff empty.
"""
from __future__ import annotations

import csv
import json
import math
from typing import Any, Iterable

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .harness import ReportSet
from .inequalities import CheckReport

SCHEMA = "cdbench-report-v1"
_CSV_COLUMNS = ("statement", "lhs", "rhs", "margin", "tol", "pass", "witness", "flags")


def _float_str(x: float) -> str:
    if math.isfinite(x):
        return format(x, ".17g")
    if math.isnan(x):
        return '"nan"'
    return '"inf"' if x > 0 else '"-inf"'


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: fixed float format, insertion-order keys."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float_str(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return canonical_json(obj.tolist())
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {canonical_json(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(canonical_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def report_object(report: CheckReport) -> dict:
    """The serialized field layout of one check."""
    return {
        "schema": SCHEMA,
        "statement": report.statement,
        "params": report.params,
        "lhs": report.lhs,
        "rhs": report.rhs,
        "margin": report.margin,
        "tol": report.tol,
        "pass": report.passed,
        "witness": report.witness,
        "diagnostics": report.flags,
    }


def emit_json(rs: ReportSet, path: str) -> None:
    lines = [canonical_json(report_object(rep)) for rep in rs.reports]
    lines.append(
        canonical_json(
            {"schema": SCHEMA, "summary": rs.summary, "scenario": rs.scenario}
        )
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_json(path: str) -> tuple[list[dict], dict]:
    """Read back an emitted file: (report objects, trailing summary object)."""
    with open(path, "r", encoding="utf-8") as fh:
        objects = [json.loads(line) for line in fh if line.strip()]
    if not objects or "summary" not in objects[-1]:
        raise ValueError(f"{path}: missing trailing summary object")
    return objects[:-1], objects[-1]


def emit_csv(rs: ReportSet, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for rep in rs.reports:
            writer.writerow(
                [
                    rep.statement,
                    _float_str(rep.lhs),
                    _float_str(rep.rhs),
                    _float_str(rep.margin),
                    _float_str(rep.tol),
                    "true" if rep.passed else "false",
                    canonical_json(rep.witness),
                    canonical_json(rep.flags),
                ]
            )


def _margin_axis(ax, reports: Iterable[CheckReport]) -> None:
    ts, idx_xs, margins, colors = [], [], [], []
    for i, rep in enumerate(reports):
        margins.append(rep.margin)
        colors.append("tab:green" if rep.passed else "tab:red")
        t = rep.params.get("t")
        ts.append(t)
        idx_xs.append(i)
    if all(t is not None for t in ts) and len(set(ts)) > 1:
        xs = ts
        ax.set_xlabel("t")
        if min(xs) > 0 and max(xs) / min(xs) > 30:
            ax.set_xscale("log")
    else:
        xs = idx_xs
        ax.set_xlabel("check index")
    ax.scatter(xs, margins, c=colors, s=18, alpha=0.8)
    ax.axhline(0.0, color="0.4", lw=0.8)
    span = max(abs(m) for m in margins) if margins else 1.0
    if span > 0 and span / max(1e-300, min(abs(m) for m in margins if m != 0.0) or span) > 1e3:
        ax.set_yscale("symlog", linthresh=1e-10)
    ax.set_ylabel("margin")
    ax.grid(True, alpha=0.3)


def emit_svg(rs: ReportSet, path: str) -> None:
    """One scatter panel of signed margins per statement."""
    groups: dict[str, list[CheckReport]] = {}
    for rep in rs.reports:
        groups.setdefault(rep.statement, []).append(rep)
    names = sorted(groups)
    ncols = 3 if len(names) > 4 else max(1, len(names))
    nrows = max(1, -(-len(names) // ncols))
    fig = Figure(figsize=(4.2 * ncols, 3.0 * nrows))
    FigureCanvasSVG(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    for ax in axes.ravel():
        ax.set_visible(False)
    for name, ax in zip(names, axes.ravel()):
        ax.set_visible(True)
        _margin_axis(ax, groups[name])
        ax.set_title(name, fontsize=10)
    title = rs.summary.get("scenario", "")
    fig.suptitle(f"{title}: signed check margins", fontsize=12)
    fig.tight_layout(rect=(0, 0, 1, 0.95))
    # seed the element-id hash and drop the timestamp so identical runs
    # produce identical files
    with matplotlib.rc_context({"svg.hashsalt": title or "cdbench"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


_EMITTERS = {
    "json": ("ndjson", emit_json),
    "csv": ("csv", emit_csv),
    "svg": ("svg", emit_svg),
    "svg_summary": ("svg", emit_svg),
}


def emit_reports(rs: ReportSet, fmt: str, path: str) -> None:
    """Write one format (json, csv, svg) of a report set to ``path``."""
    try:
        _, writer = _EMITTERS[fmt]
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}; have {sorted(_EMITTERS)}") from None
    writer(rs, path)


def default_extension(fmt: str) -> str:
    return _EMITTERS[fmt][0]
