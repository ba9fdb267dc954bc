"""Plain-text readers and writers for point clouds, graphs and results.

Floats are written with ``repr`` so a file read back reproduces the exact
values, and so reruns produce byte-identical output.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import FormatError


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_table(path) -> tuple[list[str] | None, list[list[str]]]:
    """Rows of a comma-separated file; a first row with a non-numeric first token is the header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: file is empty")
    header = None
    if not _is_number(rows[0][0].strip()):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    width = len(header) if header else len(rows[0]) if rows else 0
    for lineno, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} fields, found {len(r)}")
    return header, rows


def read_points(path, label_column: str | None = None):
    """Point cloud from CSV, optionally splitting off a label column.

    Returns ``(points, labels)``; ``labels`` is ``None`` without a label column.
    """
    header, rows = read_table(path)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    labels = None
    if label_column is not None:
        if header is None or label_column not in header:
            raise FormatError(f"{path}: no column named {label_column!r}")
        j = header.index(label_column)
        labels = np.array([r[j].strip() for r in rows])
        rows = [r[:j] + r[j + 1:] for r in rows]
    try:
        points = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return points, labels


def read_weights(path) -> np.ndarray:
    """Vertex weights from a one-column CSV or a ``vertex_index,weight`` CSV."""
    header, rows = read_table(path)
    try:
        if rows and len(rows[0]) == 2:
            idx = np.array([int(r[0]) for r in rows])
            vals = np.array([float(r[1]) for r in rows])
            if np.any(idx < 0):
                raise FormatError(f"{path}: negative vertex index")
            out = np.zeros(idx.max() + 1 if idx.size else 0)
            out[idx] = vals
            return out
        if rows and len(rows[0]) == 1:
            return np.array([float(r[0]) for r in rows])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    raise FormatError(f"{path}: expected one weight column or vertex_index,weight")


def fmt(x) -> str:
    return repr(float(x))


def write_graph(path, A) -> int:
    """Coordinate-list text: ``n nnz`` then ``i j value`` for each entry with ``i < j``.

    Returns the number of entries written.
    """
    upper = sp.triu(sp.csr_matrix(A), k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    lines = [f"{A.shape[0]} {upper.nnz}"]
    lines += [f"{upper.row[o]} {upper.col[o]} {fmt(upper.data[o])}" for o in order]
    Path(path).write_text("\n".join(lines) + "\n")
    return upper.nnz


def read_graph(path) -> sp.csr_matrix:
    lines = Path(path).read_text().split("\n")
    try:
        n, nnz = (int(x) for x in lines[0].split())
        body = [ln.split() for ln in lines[1:] if ln.strip()]
        if len(body) != nnz:
            raise FormatError(f"{path}: header says {nnz} entries, found {len(body)}")
        i = np.array([int(b[0]) for b in body], dtype=np.int64)
        j = np.array([int(b[1]) for b in body], dtype=np.int64)
        v = np.array([float(b[2]) for b in body])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    if nnz and (min(i.min(), j.min()) < 0 or max(i.max(), j.max()) >= n):
        raise FormatError(f"{path}: vertex index outside [0, {n})")
    A = sp.coo_matrix((np.concatenate([v, v]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                      shape=(n, n)).tocsr()
    A.sort_indices()
    return A


def write_matrix_csv(path, matrix, labels) -> None:
    """Square matrix with a label header row and a label first column."""
    labels = [str(x) for x in labels]
    lines = [",".join(["label"] + labels)]
    for lab, row in zip(labels, np.asarray(matrix)):
        lines.append(",".join([lab] + [fmt(x) for x in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_barycenter_csv(path, weights) -> None:
    lines = ["vertex_index,weight"] + [f"{i},{fmt(w)}" for i, w in enumerate(weights)]
    Path(path).write_text("\n".join(lines) + "\n")


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
