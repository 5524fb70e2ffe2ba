"""Byte-stable CSV export and the key=value run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SERIES_COLUMNS = ("t", "re_f", "im_f", "F", "method")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17e" % float(x)
    return str(x)


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def write_series(path, series: Sequence) -> Path:
    """One row per sample of each series; columns t, re_f, im_f, F, method."""
    rows = (
        (t, f.real, f.imag, F, s.method)
        for s in series
        for t, f, F in zip(s.times, s.f, s.F)
    )
    return _write(path, SERIES_COLUMNS, rows)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return _write(path, header, rows)


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(path, entries: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{k}={fmt(v)}\n" for k, v in entries.items()))
    return path


def read_manifest(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = v
    return out
