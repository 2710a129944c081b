"""Plain-text writers and readers for run artifacts (CSV, JSON, JSON lines).

Floats are written with ``repr`` so values round-trip exactly and the
decimal separator is always ``.``. Every CSV may start with ``#`` comment
lines, which readers skip.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .diffcore import ParamVector, ScorerSpec, param_layout
from .errors import ConfigurationError

__all__ = [
    "fmt",
    "jsonable",
    "write_text",
    "write_json",
    "write_csv",
    "write_params_csv",
    "read_params_csv",
    "write_roc_csv",
    "write_histogram_csv",
]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and replace NaN/inf by None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def write_json(path, obj) -> None:
    write_text(path, json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows, comment: str | None = None) -> None:
    lines = [f"# {comment}"] if comment else []
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    write_text(path, "\n".join(lines) + "\n")


def write_params_csv(path, params: ParamVector, comment: str | None = None) -> None:
    """One row per scalar: ``segment,index,value`` (flat index within the segment)."""
    rows = []
    for seg in params.layout:
        for i, v in enumerate(params.segment(seg.name).ravel()):
            rows.append((seg.name, i, float(v)))
    write_csv(path, ("segment", "index", "value"), rows, comment)


def read_params_csv(path, spec: ScorerSpec) -> ParamVector:
    layout = param_layout(spec)
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln.strip() and not ln.startswith("#")]
    if lines[0] != "segment,index,value":
        raise ConfigurationError(f"{path}: not a parameter CSV")
    expected = [(seg.name, i) for seg in layout for i in range(seg.size)]
    body = [ln.split(",") for ln in lines[1:]]
    if [(r[0], int(r[1])) for r in body] != expected:
        raise ConfigurationError(f"{path}: parameter layout does not match the scorer spec")
    return ParamVector(np.array([float(r[2]) for r in body]), layout)


def write_roc_csv(path, roc_rows, comment: str | None = None) -> None:
    write_csv(path, ("threshold", "tpr", "fpr"), roc_rows, comment)


def write_histogram_csv(path, edges, counts, comment: str | None = None) -> None:
    K = counts.shape[0]
    header = ["bin_lo", "bin_hi"] + [f"count_class{k}" for k in range(K)]
    rows = [(edges[b], edges[b + 1], *counts[:, b].tolist()) for b in range(counts.shape[1])]
    write_csv(path, header, rows, comment)
