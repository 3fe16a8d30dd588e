"""Deterministic CSV/JSON emission helpers.

CSV cells use 17 significant digits with '.' as the decimal separator and
RFC 4180 quoting; every emitted table gets a sibling ``<name>.meta.json``
carrying the tolerance metadata of the producing module.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, complex):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header, rows, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    if meta is not None:
        write_json(path.with_suffix(path.suffix + ".meta.json"), meta)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def mode_profile_rows(mode) -> list:
    """Block index plus interleaved re/im entries of a mode profile."""
    rows = []
    for i, block in enumerate(mode.profile):
        row = [mode.n_lo + i]
        for z in block:
            row.extend([z.real, z.imag])
        rows.append(row)
    return rows


def kernel_block_rows(kernel) -> list:
    """Offset plus interleaved re/im entries of each 6x6 kernel block."""
    rows = []
    for (e1, e2) in sorted(kernel.blocks):
        b = kernel.blocks[(e1, e2)]
        row = [e1, e2]
        for z in np.asarray(b).ravel():
            row.extend([z.real, z.imag])
        rows.append(row)
    return rows


def green_block_rows(green_kernel) -> list:
    """Offset pair (n, m) = (d, 0) plus interleaved block entries."""
    rows = []
    for d in sorted(green_kernel.blocks):
        row = [d, 0]
        for z in np.asarray(green_kernel.blocks[d]).ravel():
            row.extend([z.real, z.imag])
        rows.append(row)
    return rows
