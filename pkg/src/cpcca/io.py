"""Reading and writing transition matrices.

Two text formats are supported:

``mtx``
    Matrix Market coordinate layout. A ``%%MatrixMarket matrix coordinate
    real general`` header, optional ``%`` comment lines, a ``rows cols nnz``
    line and then ``nnz`` lines ``i j value`` with 1-based indices. Explicitly
    stored zeros are kept in the sparsity pattern.
``csv``
    Dense comma-separated values, one matrix row per line, no header.

Coordinate files are written with :func:`scipy.io.mmwrite`. They are read by
a small parser of our own so that every malformed file reports the offending
line and duplicate entries are rejected instead of summed. Both writers emit
enough digits for an exact save/load round trip.
"""
from __future__ import annotations

import csv
import os

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .errors import ParseError
from .matrix import ROW_SUM_TOL, StochasticMatrix, row_normalize, validate

FORMATS = ("mtx", "csv")

__all__ = ["load_matrix", "save_matrix", "infer_format", "FORMATS"]


def infer_format(path, fmt=None) -> str:
    if fmt is not None:
        if fmt not in FORMATS:
            raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        return fmt
    ext = os.path.splitext(str(path))[1].lower().lstrip(".")
    if ext in FORMATS:
        return ext
    raise ValueError(f"cannot infer matrix format from {path!r}; pass format=")


def _read_mtx(lines):
    it = iter(enumerate(lines, start=1))
    size = None
    for lineno, line in it:
        s = line.strip()
        if lineno == 1 and s.startswith("%%MatrixMarket"):
            tokens = s.lower().split()
            if len(tokens) < 5 or tokens[1] != "matrix" or tokens[2] != "coordinate":
                raise ParseError(lineno, "only 'matrix coordinate' files are supported")
            if tokens[3] not in ("real", "integer") or tokens[4] != "general":
                raise ParseError(lineno, f"unsupported field/symmetry {tokens[3]} {tokens[4]}")
            continue
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise ParseError(lineno, "expected 'rows cols nnz'")
        try:
            size = tuple(int(p) for p in parts)
        except ValueError:
            raise ParseError(lineno, f"bad size line {s!r}") from None
        break
    if size is None:
        raise ParseError(len(lines) + 1, "missing size line")
    nrows, ncols, nnz = size
    if nrows < 1 or ncols < 1 or nnz < 0:
        raise ParseError(lineno, f"bad dimensions {size}")

    rows, cols, vals = [], [], []
    seen = set()
    for lineno, line in it:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise ParseError(lineno, "expected 'row col value'")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(lineno, f"cannot parse entry {s!r}") from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(lineno, f"index ({i}, {j}) outside {nrows} x {ncols}")
        if (i, j) in seen:
            raise ParseError(lineno, f"duplicate entry ({i}, {j})")
        if len(vals) == nnz:
            raise ParseError(lineno, f"more than the declared {nnz} entries")
        seen.add((i, j))
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if len(vals) != nnz:
        raise ParseError(len(lines) + 1, f"declared {nnz} entries, found {len(vals)}")
    return sp.csr_matrix((vals, (rows, cols)), shape=(nrows, ncols))


def _read_csv(lines):
    rows = []
    for lineno, fields in enumerate(csv.reader(lines), start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        try:
            rows.append((lineno, [float(f) for f in fields]))
        except ValueError:
            raise ParseError(lineno, "non-numeric field") from None
    if not rows:
        raise ParseError(1, "empty file")
    n = len(rows)
    for lineno, r in rows:
        if len(r) != n:
            raise ParseError(lineno, f"row has {len(r)} columns, expected {n} "
                                     f"for a {n} x {n} matrix")
    return np.array([r for _, r in rows])


def load_matrix(path, format: str | None = None, raw: bool = False,
                tol: float = ROW_SUM_TOL) -> StochasticMatrix:
    """Load a transition matrix from ``path``.

    With ``raw=True`` the rows are normalized to sum to one first; otherwise
    the file content must already be row-stochastic. Coordinate files keep
    sparse storage so that stored zeros survive a round trip.
    """
    fmt = infer_format(path, format)
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if fmt == "mtx":
        m, storage = _read_mtx(lines), "sparse"
    else:
        m, storage = _read_csv(lines), "auto"
    if raw:
        return row_normalize(m, tol=tol, storage=storage)
    return validate(m, tol=tol, storage=storage)


def save_matrix(matrix, path, format: str | None = None) -> None:
    fmt = infer_format(path, format)
    m = matrix.data if isinstance(matrix, StochasticMatrix) else matrix
    if fmt == "mtx":
        coo = sp.coo_matrix(m)
        order = np.lexsort((coo.col, coo.row))
        coo = sp.coo_matrix((coo.data[order], (coo.row[order], coo.col[order])), shape=coo.shape)
        # a file handle keeps mmwrite from appending ".mtx" to other names
        with open(path, "wb") as fh:
            mmwrite(fh, coo, field="real", symmetry="general")
    else:
        dense = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)
        with open(path, "w", newline="") as fh:
            for row in dense:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
