"""Delimiter-separated tables for external plotting.

``slope`` tables hold ``x, y, y_err`` with a log-log flag and the fitted
line in the header; ``sandwich`` tables hold ``index, lower, estimate,
upper``; ``spectrum`` tables hold ``|k|, |coefficient|`` of a field.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .besovlp import GridField, frequency_grid
from .errors import ValidationError
from .report import ExperimentReport

__all__ = ["emit_plot_data", "emit_all", "slope_series", "sandwich_series"]

KINDS = ("slope", "sandwich", "spectrum")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_").lower()


def slope_series(record) -> tuple | None:
    """``(x, y, y_err)`` of a record carrying a gap table, or ``None``."""
    d = record.details
    if "rows" in d and d["rows"] and isinstance(d["rows"][0], dict) and "gap" in d["rows"][0]:
        rows = [row for row in d["rows"] if row["gap"] > 0]
        return (np.array([row["gap"] for row in rows]), np.array([row["estimate"] for row in rows]),
                np.array([row["std_error"] for row in rows]))
    if "gaps" in d and "values" in d:
        x, y = np.asarray(d["gaps"], float), np.asarray(d["values"], float)
        keep = x > 0
        return x[keep], y[keep], np.zeros(int(keep.sum()))
    return None


def sandwich_series(record) -> tuple | None:
    d = record.details
    if "lower" in d and "upper" in d:
        return float(d["lower"]), float(d.get("sup", record.estimate)), float(d["upper"])
    return None


def _write(path: Path, header: str, columns) -> Path:
    np.savetxt(path, np.column_stack(columns), delimiter=",", header=header, comments="# ")
    return path


def emit_plot_data(source, kind: str, out_dir) -> list:
    """Write plot tables for ``kind`` and return the paths.

    ``source`` is an :class:`ExperimentReport` for ``slope`` and
    ``sandwich`` and a :class:`GridField` for ``spectrum``.  A missing
    series raises :class:`ValidationError`.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown plot kind {kind!r}; choose from {', '.join(KINDS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "spectrum":
        if not isinstance(source, GridField):
            raise ValidationError("spectrum tables are made from a GridField")
        _, abs_k = frequency_grid(source.N, source.d)
        order = np.argsort(abs_k.ravel(), kind="stable")
        return [_write(out / "spectrum.csv", "loglog=false\nabs_k,abs_coefficient",
                       [abs_k.ravel()[order], np.abs(source.spectrum).ravel()[order]])]
    if not isinstance(source, ExperimentReport):
        raise ValidationError(f"{kind} tables are made from an ExperimentReport")
    paths = []
    if kind == "slope":
        for rec in source.records:
            series = slope_series(rec)
            if series is None or series[0].size < 2:
                continue
            x, y, err = series
            pos = y > 0
            slope, intercept = np.polyfit(np.log(x[pos]), np.log(y[pos]), 1) if pos.sum() >= 2 else (np.nan, np.nan)
            header = f"loglog=true\nfit: log y = {slope:.10g} log x + {intercept:.10g}\nx,y,y_err"
            paths.append(_write(out / f"slope_{_slug(rec.name)}.csv", header, [x, y, err]))
    else:
        rows = [(i, *s) for i, s in enumerate(map(sandwich_series, source.records)) if s is not None]
        if rows:
            names = [source.records[i].name for i, *_ in rows]
            header = "loglog=false\n" + "\n".join(f"{i}: {n}" for (i, *_), n in zip(rows, names))
            header += "\nindex,lower,estimate,upper"
            paths.append(_write(out / "sandwich.csv", header, np.array(rows, dtype=float).T))
    if not paths:
        raise ValidationError(f"report {source.suite!r} has no {kind} series")
    return paths


def emit_all(report: ExperimentReport, out_dir) -> list:
    """Every report-based table that the report supports."""
    paths = []
    for kind in ("slope", "sandwich"):
        try:
            paths.extend(emit_plot_data(report, kind, out_dir))
        except ValidationError:
            continue
    return paths
