"""Readers for the cross-section CSV exports.

Two formats, both plain CSV with a header row:

* polygon files — columns ``vertex_index,x1,x2``; vertex loops separated
  by blank records, each loop listed once without repeating the first
  vertex;
* point files — columns ``x1,x2[,...]`` with an optional ``status``
  column (rollout classification exports carry one).

Reading never modifies the files.
"""

import csv

import numpy as np

from .errors import ReaderError

POLYGON_HEADER = ["vertex_index", "x1", "x2"]


def read_polygons(path):
    """-> list of (n, 2) vertex-loop arrays, n >= 3 each."""
    loops = []
    current = []
    try:
        f = open(path, newline="")
    except OSError as e:
        raise ReaderError(f"cannot read {path}: {e}")
    with f:
        rows = csv.reader(f)
        header = next(rows, None)
        if header != POLYGON_HEADER:
            raise ReaderError(
                f"{path}: expected header {POLYGON_HEADER}, got {header}")
        for row in rows:
            if not row:
                if current:
                    loops.append(current)
                    current = []
                continue
            try:
                current.append((float(row[1]), float(row[2])))
            except (IndexError, ValueError) as e:
                raise ReaderError(f"{path}: bad vertex row {row!r}: {e}")
        if current:
            loops.append(current)
    out = []
    for i, loop in enumerate(loops):
        if len(loop) < 3:
            raise ReaderError(
                f"{path}: polygon {i} has {len(loop)} vertices; a closed "
                f"loop needs at least 3")
        out.append(np.asarray(loop, dtype=float))
    return out


def read_points(path, status=None):
    """-> (n, 2) array of (x1, x2) rows.

    `status` filters on the file's status column when given; asking for
    a status the file does not carry is an error.
    """
    try:
        f = open(path, newline="")
    except OSError as e:
        raise ReaderError(f"cannot read {path}: {e}")
    with f:
        rows = csv.DictReader(f)
        fields = rows.fieldnames or []
        if "x1" not in fields or "x2" not in fields:
            raise ReaderError(
                f"{path}: expected x1/x2 columns, got {fields}")
        if status is not None and "status" not in fields:
            raise ReaderError(
                f"{path}: no status column to filter on")
        pts = []
        for row in rows:
            if status is not None and row["status"] != status:
                continue
            try:
                pts.append((float(row["x1"]), float(row["x2"])))
            except ValueError as e:
                raise ReaderError(f"{path}: bad point row {row!r}: {e}")
    return np.asarray(pts, dtype=float).reshape(-1, 2)
