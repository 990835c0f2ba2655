"""Row-stochastic transition matrices: validation, normalization, generators
and the small reference matrices used throughout the test-suite.

Random generators draw from numpy's PCG64 bit generator, which produces the
same stream on every platform for a given integer seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (InvalidSpec, NegativeEntry, NonSquare, RowSumViolation,
                     UnknownFixture, ValidationError, ZeroRow)

ROW_SUM_TOL = 1e-12
DENSE_LIMIT = 2048

__all__ = [
    "StochasticMatrix", "CircularSpec", "validate", "row_normalize",
    "generate_circular", "generate_nearly_uncoupled", "fixture",
    "FIXTURE_NAMES", "rng_from_seed", "uniform_density", "as_density",
]


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """A validated row-stochastic N x N matrix.

    Use :func:`validate` or :func:`row_normalize` to construct one. ``data`` is
    either a read-only ``numpy.ndarray`` or a ``scipy.sparse.csr_matrix``.
    """
    data: object
    tol: float = ROW_SUM_TOL

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def kind(self) -> str:
        return "sparse" if sp.issparse(self.data) else "dense"

    def toarray(self) -> np.ndarray:
        if sp.issparse(self.data):
            return self.data.toarray()
        return self.data

    def __array__(self, dtype=None, copy=None):
        a = self.toarray()
        return a if dtype is None else a.astype(dtype)

    def matmul(self, x):
        """Return ``P @ x`` without densifying sparse storage."""
        return self.data @ x

    def rmatmul(self, x):
        """Return ``P.T @ x``."""
        return self.data.T @ x

    def __repr__(self):
        return f"StochasticMatrix(dim={self.dim}, kind={self.kind!r})"


def _check_entries(m):
    """Square, finite, nonnegative; returns the (CSR or dense) float array."""
    if sp.issparse(m):
        m = sp.csr_matrix(m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NonSquare(f"matrix of shape {m.shape} is not square")
        values = m.data
    else:
        m = np.array(m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NonSquare(f"matrix of shape {m.shape} is not square")
        values = m
    if m.shape[0] < 2:
        raise ValidationError("transition matrices need at least 2 states")
    if not np.all(np.isfinite(values)):
        raise ValidationError("matrix contains non-finite entries")
    if np.any(values < 0):
        if sp.issparse(m):
            coo = m.tocoo()
            k = np.flatnonzero(coo.data < 0)
            order = np.lexsort((coo.col[k], coo.row[k]))[0]
            i, j = int(coo.row[k][order]), int(coo.col[k][order])
        else:
            i, j = (int(t) for t in np.argwhere(m < 0)[0])
        raise NegativeEntry(i, j, float(m[i, j]))
    return m


def _row_sums(m):
    return np.asarray(m.sum(axis=1)).ravel()


def _freeze(m, storage):
    if storage == "auto":
        storage = "sparse" if m.shape[0] > DENSE_LIMIT else "dense"
    if storage == "dense":
        m = m.toarray() if sp.issparse(m) else m.copy()
        m.setflags(write=False)
        return m
    if storage == "sparse":
        return sp.csr_matrix(m)
    raise ValueError(f"unknown storage {storage!r}")


def validate(m, tol: float = ROW_SUM_TOL, storage: str = "auto") -> StochasticMatrix:
    """Check that ``m`` is row-stochastic and wrap it.

    Parameters
    ----------
    m : array_like or scipy.sparse matrix
        Candidate N x N transition matrix. It is copied, never modified.
    tol : float
        Maximum allowed deviation of a row sum from 1.
    storage : {"auto", "dense", "sparse"}
        "auto" keeps matrices up to 2048 states dense.

    Raises
    ------
    NonSquare, NegativeEntry, RowSumViolation
    """
    m = _check_entries(m)
    sums = _row_sums(m)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise RowSumViolation(int(bad[0]), float(sums[bad[0]]))
    return StochasticMatrix(_freeze(m, storage), tol)


def row_normalize(m, tol: float = ROW_SUM_TOL, storage: str = "auto") -> StochasticMatrix:
    """Divide each row of a nonnegative matrix by its sum."""
    m = _check_entries(m)
    sums = _row_sums(m)
    zero = np.flatnonzero(sums <= 0)
    if zero.size:
        raise ZeroRow(int(zero[0]))
    if sp.issparse(m):
        m = sp.diags(1.0 / sums) @ m
    else:
        m = m / sums[:, None]
    return validate(m, tol=tol, storage=storage)


def rng_from_seed(seed) -> np.random.Generator:
    """PCG64 generator for an integer seed or a ``SeedSequence``."""
    return np.random.Generator(np.random.PCG64(seed))


def uniform_density(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def as_density(w, n: int | None = None, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate a strictly positive weight vector summing to one."""
    w = np.asarray(w, dtype=float).ravel()
    if n is not None and w.shape[0] != n:
        raise ValidationError(f"density has length {w.shape[0]}, expected {n}")
    if not np.all(w > 0):
        raise ValidationError("weight vector must be strictly positive")
    if abs(w.sum() - 1.0) > tol:
        raise ValidationError(f"weight vector sums to {w.sum()!r}, expected 1")
    return w


# -- generators ------------------------------------------------------------

@dataclass(frozen=True)
class CircularSpec:
    """Block-circular generator settings.

    ``blocks`` groups of ``block_size`` states; group k feeds group k+1 (mod
    ``blocks``) through a uniform random block. With ``eps > 0`` a uniform
    [0, eps) matrix is added everywhere before normalizing.
    """
    blocks: int
    block_size: int
    eps: float = 0.0
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.blocks * self.block_size

    def check(self):
        if int(self.blocks) != self.blocks or self.blocks < 2:
            raise InvalidSpec(f"blocks must be an integer >= 2, got {self.blocks!r}")
        if int(self.block_size) != self.block_size or self.block_size < 1:
            raise InvalidSpec(f"block_size must be an integer >= 1, got {self.block_size!r}")
        if not 0.0 <= self.eps < 1.0:
            raise InvalidSpec(f"eps must lie in [0, 1), got {self.eps!r}")
        if isinstance(self.seed, (int, np.integer)) and self.seed < 0:
            raise InvalidSpec("seed must be nonnegative")


def generate_circular(spec: CircularSpec, storage: str = "auto") -> StochasticMatrix:
    spec.check()
    rng = rng_from_seed(spec.seed)
    nb, n = spec.blocks, spec.block_size
    raw = np.zeros((nb * n, nb * n))
    for k in range(nb):
        nxt = (k + 1) % nb
        raw[k * n:(k + 1) * n, nxt * n:(nxt + 1) * n] = rng.random((n, n))
    if spec.eps > 0:
        raw += spec.eps * rng.random(raw.shape)
    return row_normalize(raw, storage=storage)


def generate_nearly_uncoupled(blocks: int, block_size: int, coupling: float = 0.01,
                              seed=0, storage: str = "auto") -> StochasticMatrix:
    """Random block-diagonal chain leaking exactly ``coupling`` mass per row.

    Each diagonal block is a row-normalized uniform random matrix scaled by
    ``1 - coupling``; the off-block part of every row is a normalized uniform
    random vector scaled by ``coupling``.
    """
    if int(blocks) != blocks or blocks < 1:
        raise InvalidSpec(f"blocks must be a positive integer, got {blocks!r}")
    if int(block_size) != block_size or block_size < 1:
        raise InvalidSpec(f"block_size must be a positive integer, got {block_size!r}")
    if blocks * block_size < 2:
        raise InvalidSpec("need at least 2 states")
    if not 0.0 <= coupling < 1.0:
        raise InvalidSpec(f"coupling must lie in [0, 1), got {coupling!r}")
    if coupling > 0 and blocks < 2:
        raise InvalidSpec("a single block cannot leak probability mass")
    rng = rng_from_seed(seed)
    dim = blocks * block_size
    labels = np.repeat(np.arange(blocks), block_size)
    inside = labels[:, None] == labels[None, :]

    diag = np.where(inside, rng.random((dim, dim)), 0.0)
    diag /= diag.sum(axis=1, keepdims=True)
    p = (1.0 - coupling) * diag
    if coupling > 0:
        off = np.where(inside, 0.0, rng.random((dim, dim)))
        off /= off.sum(axis=1, keepdims=True)
        p += coupling * off
    return validate(p, storage=storage)


# -- reference matrices ----------------------------------------------------

_EXAMPLE1 = np.array([
    [0.25, 0.70, 0.00, 0.00, 0.00, 0.05],
    [0.70, 0.29, 0.01, 0.00, 0.00, 0.00],
    [0.00, 0.05, 0.25, 0.70, 0.00, 0.00],
    [0.00, 0.00, 0.70, 0.29, 0.01, 0.00],
    [0.00, 0.00, 0.00, 0.05, 0.25, 0.70],
    [0.01, 0.00, 0.00, 0.00, 0.70, 0.29],
])

_EXAMPLE2_PARAMS = {(0.9, 0.1), (0.1, 0.9)}

FIXTURE_NAMES = ("example1", "example2:0.9:0.1", "example2:0.1:0.9")


def _example2(x, y):
    X = np.array([[0.0, x, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    Y = np.zeros((3, 3))
    Y[0, 0] = y
    Z = np.zeros((3, 3))
    return np.block([[X, Y, Z], [Z, X, Y], [Y, Z, X]])


def fixture(name: str, x: float | None = None, y: float | None = None) -> StochasticMatrix:
    """Return one of the reference matrices.

    ``"example1"`` is a 6-state non-reversible chain with three metastable
    pairs of states. ``"example2"`` is the 9-state chain built from diagonal
    blocks X (``x`` at position (1, 2)) and off-diagonal blocks Y (``y`` at
    position (1, 1)); pass ``x`` and ``y`` or use ``"example2:0.9:0.1"``.
    """
    parts = name.split(":")
    if parts[0] == "example1" and len(parts) == 1 and x is None and y is None:
        return validate(_EXAMPLE1)
    if parts[0] == "example2":
        try:
            if len(parts) == 3 and x is None and y is None:
                x, y = float(parts[1]), float(parts[2])
            elif len(parts) != 1:
                raise ValueError
        except ValueError:
            raise UnknownFixture(f"cannot parse fixture name {name!r}") from None
        if (x, y) in _EXAMPLE2_PARAMS:
            return validate(_example2(x, y))
        raise UnknownFixture(f"example2 is defined for (x, y) in "
                             f"{sorted(_EXAMPLE2_PARAMS)}, got ({x}, {y})")
    raise UnknownFixture(f"unknown fixture {name!r}; known: {', '.join(FIXTURE_NAMES)}")
