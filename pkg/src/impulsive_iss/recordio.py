"""Delimited-text trajectory files.

The first line is ``# meta: {json}`` (disturbance level and run metadata), then
a header row with the columns of :data:`harness.COLUMNS` and one row per
sample. Floats are written with ``repr`` so that reading a file back gives
bit-identical arrays.
"""
from __future__ import annotations

import csv
import io
import json

import numpy as np

from .harness import COLUMNS, TrajectoryRecord

META_PREFIX = "# meta: "


def _f(x) -> str:
    return repr(float(x))


def format_trajectory(rec: TrajectoryRecord) -> str:
    buf = io.StringIO()
    buf.write(META_PREFIX + json.dumps({"d": rec.d, **rec.meta}, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    V, W, U = rec.V, rec.W, rec.U
    for i in range(rec.t.size):
        k = int(rec.jump_index[i])
        w.writerow([_f(rec.t[i]), _f(rec.y[i]), _f(rec.l2_x[i]), _f(rec.h01_x[i]),
                    _f(V[i]), _f(W[i]), _f(U[i]), "G+" if W[i] >= 0 else "G-",
                    "" if k < 0 else str(k)])
    return buf.getvalue()


def write_trajectory(rec: TrajectoryRecord, path: str) -> None:
    text = format_trajectory(rec)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise OSError(f"cannot write trajectory to {path}: {e.strerror}") from None


def parse_trajectory(text: str) -> TrajectoryRecord:
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith(META_PREFIX):
        meta = json.loads(lines[0][len(META_PREFIX):])
        lines = lines[1:]
    rows = list(csv.reader(lines))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError(f"unexpected header {rows[:1]}")
    body = rows[1:]
    col = {c: i for i, c in enumerate(COLUMNS)}

    def arr(name):
        return np.array([float(r[col[name]]) for r in body], dtype=float)

    ji = np.array([int(r[col["jump_index"]]) if r[col["jump_index"]] else -1 for r in body], dtype=int)
    d = float(meta.pop("d", 0.0))
    return TrajectoryRecord(t=arr("t"), y=arr("y"), l2_x=arr("l2_x"), h01_x=arr("h01_x"),
                            jump_index=ji, d=d, meta=meta)


def read_trajectory(path: str) -> TrajectoryRecord:
    try:
        with open(path, newline="") as fh:
            return parse_trajectory(fh.read())
    except OSError as e:
        raise OSError(f"cannot read trajectory {path}: {e.strerror}") from None
