"""Small file helpers shared by the exporters.

Every writer goes through :func:`atomic_write_text` so a failed export never
leaves a truncated file behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    """Shortest round-trip text for a number; stable across runs."""
    if isinstance(x, (bool, str, np.bool_)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: Sequence[str] | None, rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def read_csv(path, header: bool = True):
    """Return ``(header, rows)``, or just the rows when ``header=False``."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not header:
        return rows
    if not rows:
        raise ValueError(f"{path}: empty CSV file")
    return [h.strip() for h in rows[0]], rows[1:]


def write_json(path, obj) -> Path:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    return atomic_write_text(path, text)
