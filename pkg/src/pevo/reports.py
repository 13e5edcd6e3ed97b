"""Deterministic JSON and CSV emission."""

from __future__ import annotations

import csv
import io
import json
import math
import os

import numpy as np

SIGNIFICANT = 12


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIGNIFICANT}g}")
    if isinstance(obj, complex):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    if hasattr(obj, "to_dict"):
        return _clean(obj.to_dict())
    return obj


def dumps(payload) -> str:
    """Sorted keys, 12 significant digits, no timestamps: equal inputs give equal bytes."""
    return json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str, payload) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(payload))
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{SIGNIFICANT}g}"
    return str(v)


def write_csv(path: str, header: list, rows) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def envelope(command: str, run_config, body: dict, audit: dict | None = None) -> dict:
    """Every report carries the command, the config hash and document, and the constants audit."""
    return {
        "command": command,
        "config_sha256": run_config.hash,
        "config": run_config.doc,
        "constants_audit": audit,
        "result": body,
    }
