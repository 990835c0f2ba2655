"""Dominant invariant subspaces of (possibly non-reversible) transition matrices.

The pipeline is ``dominant_eigenpairs -> realify -> orthonormalize``. A complex
conjugate eigenpair ``a +/- ib`` with eigenvectors ``x, conj(x)`` is replaced by
the real columns ``Re x, Im x``; the resulting real basis spans the same
invariant subspace and satisfies ``P X = X L`` with ``L`` block diagonal, the
pair contributing the block ``[[a, b], [-b, a]]``.

Weighted orthonormality means ``X.T @ diag(w) @ X = I`` for a density ``w``.
Because ``w`` sums to one, the constant column of an orthonormal basis is the
all-ones vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (ConstantVectorNotInSpan, DefectiveOrIllConditioned,
                     DimensionMismatch, InvalidSelection,
                     NonNegligibleImaginaryPart, RankDeficient,
                     SplitConjugatePair, UnpairedComplexColumn, ValidationError)
from .matrix import StochasticMatrix, as_density, uniform_density

MAGNITUDE = "magnitude"
REAL = "real"
_MODE_ALIASES = {
    "magnitude": MAGNITUDE, "largest-magnitude": MAGNITUDE, "lm": MAGNITUDE,
    "real": REAL, "largest-real-part": REAL, "lr": REAL,
}

PAIR_TOL = 1e-8        # relative, for matching conjugate eigenvalues
TIE_TOL = 1e-9         # relative, sort keys closer than this are ties
IMAG_TOL = 1e-10       # imaginary residue allowed on real eigenvectors
COND_CAP = 1e12
RANK_TOL = 1e-10
SPAN_TOL = 1e-8

# Column block mapping (x, conj(x)) to (Re x, Im x).
REALIFY_BLOCK = np.array([[0.5, -0.5j], [0.5, 0.5j]])

__all__ = [
    "EigenSelection", "DominantSpectrum", "SpectralBasis", "RealifyCertificate",
    "normalize_mode", "sort_eigenvalues", "dominant_eigenpairs", "realify",
    "eigendecomposition", "select_eigenpairs",
    "orthonormalize", "subspace_residual", "stationary_density",
    "resolve_weight", "spectral_basis", "circular_check", "MAGNITUDE", "REAL",
]


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise InvalidSelection(f"unknown selection mode {mode!r}; "
                               f"use 'magnitude' or 'real'") from None


@dataclass(frozen=True)
class EigenSelection:
    mode: str
    count: int

    def __post_init__(self):
        object.__setattr__(self, "mode", normalize_mode(self.mode))
        if int(self.count) != self.count or self.count < 1:
            raise InvalidSelection(f"count must be a positive integer, got {self.count!r}")


@dataclass(frozen=True)
class DominantSpectrum:
    """Selected eigenvalues, best first.

    ``pairs`` lists index tuples ``(k, k + 1)`` of conjugate pairs, the
    eigenvalue with positive imaginary part first.
    """
    eigenvalues: np.ndarray
    pairs: tuple
    selection: EigenSelection

    def is_paired(self, k) -> bool:
        return any(k in p for p in self.pairs)


@dataclass(frozen=True)
class RealifyCertificate:
    """Records the column transform used by :func:`realify`.

    ``realified == complex_vectors @ certificate.matrix()`` holds up to
    rounding, every pair block being ``[[1/2, -i/2], [1/2, i/2]]``.
    """
    pairs: tuple
    size: int

    @property
    def blocks(self):
        return tuple(REALIFY_BLOCK.copy() for _ in self.pairs)

    def matrix(self) -> np.ndarray:
        C = np.eye(self.size, dtype=complex)
        for k, l in self.pairs:
            C[np.ix_([k, l], [k, l])] = REALIFY_BLOCK
        return C


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Real, weighted-orthonormal basis of a dominant invariant subspace.

    Attributes
    ----------
    vectors : ndarray, shape (N, n_c)
        Basis ``X``; the first column is constant.
    block_spectrum : ndarray, shape (n_c, n_c)
        Real matrix ``L`` with ``P @ X = X @ L``.
    weight : ndarray, shape (N,)
        Density used for the orthonormality relation.
    spectrum : DominantSpectrum or None
    residual : float
        ``||P X - X L||_F / ||X||_F`` (nan when no matrix was supplied).
    """
    vectors: np.ndarray
    block_spectrum: np.ndarray
    weight: np.ndarray
    spectrum: DominantSpectrum | None = None
    residual: float = float("nan")
    dropped_column: int | None = field(default=None, repr=False)

    @property
    def n_clusters(self) -> int:
        return self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def gram(self) -> np.ndarray:
        X = self.vectors
        return X.T @ (self.weight[:, None] * X)


# -- eigenvalue ordering ---------------------------------------------------

def _match_pairs(evals):
    """Group eigenvalue indices into real singletons and conjugate pairs."""
    n = len(evals)
    scale = np.maximum(1.0, np.abs(evals))
    is_complex = np.abs(evals.imag) > PAIR_TOL * scale
    lower = [i for i in range(n) if is_complex[i] and evals[i].imag < 0]
    units = []
    for i in range(n):
        if not is_complex[i]:
            units.append((i,))
        elif evals[i].imag > 0:
            if not lower:
                raise UnpairedComplexColumn(f"eigenvalue {evals[i]} has no conjugate partner")
            dist = [abs(np.conj(evals[i]) - evals[j]) for j in lower]
            best = int(np.argmin(dist))
            if dist[best] > PAIR_TOL * scale[i]:
                raise UnpairedComplexColumn(f"eigenvalue {evals[i]} has no conjugate partner")
            units.append((i, lower.pop(best)))
    if lower:
        raise UnpairedComplexColumn(f"eigenvalue {evals[lower[0]]} has no conjugate partner")
    return units


def sort_eigenvalues(evals, mode: str):
    """Order eigenvalues for dominance selection.

    Returns ``(order, pairs)``: a permutation of ``range(len(evals))`` and the
    positions ``(k, k + 1)`` of conjugate pairs within that order.

    Sorting is by the mode's key (modulus or real part) descending; keys
    within a relative ``TIE_TOL`` of each other count as equal and are then
    ordered by real part, then imaginary part, then index, all descending
    except the index. A pair is one unit, so it always stays adjacent.
    """
    mode = normalize_mode(mode)
    evals = np.asarray(evals, dtype=complex)
    units = _match_pairs(evals)
    keyfn = np.abs if mode == MAGNITUDE else np.real
    keys = [float(keyfn(evals[u[0]])) for u in units]

    by_key = sorted(range(len(units)), key=lambda k: (-keys[k], units[k][0]))
    group = {}
    leader = None
    g = -1
    for k in by_key:
        if leader is None or keys[k] < leader - TIE_TOL * max(1.0, abs(leader)):
            g += 1
            leader = keys[k]
        group[k] = g

    def rank(k):
        lam = evals[units[k][0]]
        return (group[k], -lam.real, -abs(lam.imag), units[k][0])

    order, pairs = [], []
    for k in sorted(range(len(units)), key=rank):
        if len(units[k]) == 2:
            pairs.append((len(order), len(order) + 1))
        order.extend(units[k])
    return np.array(order), tuple(pairs)


def _phase_normalize(v):
    """Rotate ``v`` so that its largest-modulus entry is real positive."""
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def dominant_eigenpairs(P, selection: EigenSelection, cond_cap: float = COND_CAP):
    """Select the ``selection.count`` dominant eigenpairs of ``P``.

    Returns ``(DominantSpectrum, V)`` with ``V`` the complex N x n_c matrix of
    right eigenvectors, conjugate pairs in adjacent columns and exactly
    conjugate to each other.

    Raises
    ------
    InvalidSelection
        If the count is not smaller than the matrix dimension.
    DefectiveOrIllConditioned
        If the eigenvector matrix is numerically singular.
    SplitConjugatePair
        If the cut after ``count`` eigenvalues separates a conjugate pair.
    """
    dense = _dense(P)
    if selection.count >= dense.shape[0]:
        raise InvalidSelection(f"count {selection.count} must be smaller than the "
                               f"matrix dimension {dense.shape[0]}")
    return select_eigenpairs(*eigendecomposition(dense, cond_cap), selection)


def _dense(P):
    return np.asarray(P.toarray() if isinstance(P, StochasticMatrix) else P, dtype=float)


def eigendecomposition(P, cond_cap: float = COND_CAP):
    """Full dense eigendecomposition with unit-norm eigenvectors.

    Raises DefectiveOrIllConditioned when the eigenvector matrix is
    numerically singular.
    """
    evals, evecs = sla.eig(_dense(P))
    if not np.all(np.isfinite(evals)) or not np.all(np.isfinite(evecs)):
        raise DefectiveOrIllConditioned("eigensolver returned non-finite values")
    evecs = evecs / np.linalg.norm(evecs, axis=0)
    cond = np.linalg.cond(evecs)
    if not np.isfinite(cond) or cond > cond_cap:
        raise DefectiveOrIllConditioned(
            f"eigenvector matrix has condition number {cond:.3e} > {cond_cap:.1e}; "
            f"the matrix has no reliable eigendecomposition")
    return evals, evecs


def select_eigenpairs(evals, evecs, selection: EigenSelection):
    """Pick dominant eigenpairs out of a full decomposition."""
    n = evals.shape[0]
    nc = selection.count
    if nc >= n:
        raise InvalidSelection(f"count {nc} must be smaller than the matrix dimension {n}")
    order, pairs = sort_eigenvalues(evals, selection.mode)
    for k, l in pairs:
        if k == nc - 1 and l == nc:
            suggested = [c for c in (nc - 1, nc + 1) if 1 <= c < n]
            raise SplitConjugatePair(nc, suggested)
    pairs = tuple(p for p in pairs if p[1] < nc)
    idx = order[:nc]
    lam = evals[idx].copy()
    V = evecs[:, idx].copy()
    paired = {i for p in pairs for i in p}
    for k in range(nc):
        if k not in paired:
            lam[k] = lam[k].real
            V[:, k] = _phase_normalize(V[:, k])
    for k, l in pairs:
        V[:, k] = _phase_normalize(V[:, k])
        V[:, l] = np.conj(V[:, k])
        lam[l] = np.conj(lam[k])
    _pin_constant(evals, evecs, lam, V)
    return DominantSpectrum(lam, pairs, selection), V


def _pin_constant(evals, evecs, lam, V):
    """Make the Perron slot the exact constant vector.

    When the eigenvalue 1 is repeated (decoupled chains) an arbitrary subset
    of its eigenvectors need not contain the constant vector, so the selected
    unit-eigenvalue slots are refilled with the constant vector followed by an
    orthonormal basis of the rest of that eigenspace.
    """
    n = V.shape[0]
    unit = np.abs(evals - 1.0) <= PAIR_TOL
    slots = [k for k in range(V.shape[1]) if abs(lam[k] - 1.0) <= PAIR_TOL]
    if not slots or slots[0] != 0:
        return
    ones = np.full(n, 1.0 / np.sqrt(n))
    E = evecs[:, unit].real
    E = E - np.outer(ones, ones @ E)
    U, s, _ = np.linalg.svd(E, full_matrices=False)
    rest = U[:, s > 1e-8 * max(1.0, s.max(initial=0.0))]
    fill = [ones] + [_phase_normalize(rest[:, j].astype(complex)).real
                     for j in range(rest.shape[1])]
    for k, v in zip(slots, fill):
        V[:, k] = v
        lam[k] = 1.0


# -- realification ---------------------------------------------------------

def realify(V, spectrum: DominantSpectrum, imag_tol: float = IMAG_TOL):
    """Replace each conjugate eigenvector pair by its real and imaginary parts.

    Returns ``(X, L, certificate)`` with ``X`` real, ``L`` the real block
    spectrum and ``certificate`` the column transform ``C`` (``X = V @ C``).
    """
    V = np.asarray(V, dtype=complex)
    lam = np.asarray(spectrum.eigenvalues, dtype=complex)
    nc = V.shape[1]
    if lam.shape[0] != nc:
        raise DimensionMismatch(f"{nc} vectors but {lam.shape[0]} eigenvalues")
    X = np.empty(V.shape)
    L = np.zeros((nc, nc))
    paired = set()
    for k, l in spectrum.pairs:
        if l != k + 1 or l >= nc:
            raise UnpairedComplexColumn(f"pair {(k, l)} is not a pair of adjacent columns")
        scale = max(1.0, np.abs(V[:, k]).max())
        if np.abs(V[:, l] - np.conj(V[:, k])).max() > imag_tol * scale:
            raise UnpairedComplexColumn(f"columns {k} and {l} are not complex conjugates")
        a, b = lam[k].real, lam[k].imag
        X[:, k] = V[:, k].real
        X[:, l] = V[:, k].imag
        L[k, k] = L[l, l] = a
        L[k, l] = b
        L[l, k] = -b
        paired.update((k, l))
    for k in range(nc):
        if k in paired:
            continue
        scale = max(1.0, abs(lam[k]))
        if abs(lam[k].imag) > PAIR_TOL * scale:
            raise UnpairedComplexColumn(f"column {k} has complex eigenvalue {lam[k]} "
                                        f"but no partner")
        imag = np.abs(V[:, k].imag).max()
        if imag > imag_tol * max(1.0, np.abs(V[:, k]).max()):
            raise NonNegligibleImaginaryPart(k, imag)
        X[:, k] = V[:, k].real
        L[k, k] = lam[k].real
    return X, L, RealifyCertificate(tuple(spectrum.pairs), nc)


# -- weighted orthonormalization -------------------------------------------

def _gram_schmidt(Y):
    """Twice-iterated modified Gram-Schmidt; returns (Q, residual ratios)."""
    n, m = Y.shape
    Q = np.zeros((n, m))
    ratios = np.zeros(m)
    for k in range(m):
        v = Y[:, k].copy()
        norm0 = np.linalg.norm(v)
        for _ in range(2):
            for j in range(k):
                v -= (Q[:, j] @ v) * Q[:, j]
        nv = np.linalg.norm(v)
        ratios[k] = nv / norm0 if norm0 > 0 else 0.0
        Q[:, k] = v / nv if nv > 0 else 0.0
    return Q, ratios


def orthonormalize(X, w=None, block_spectrum=None, *, spectrum=None, P=None,
                   rank_tol: float = RANK_TOL, span_tol: float = SPAN_TOL) -> SpectralBasis:
    """Weighted Gram-Schmidt with the constant vector pinned first.

    Parameters
    ----------
    X : ndarray, shape (N, n_c)
        Real basis of an invariant subspace containing the constant vector.
    w : ndarray, optional
        Strictly positive density (default uniform).
    block_spectrum : ndarray, optional
        ``L`` with ``P X = X L``; it is carried over to the new basis by the
        similarity induced by the change of basis.
    spectrum : DominantSpectrum, optional
        Stored on the result.
    P : StochasticMatrix or ndarray, optional
        If given, the invariant-subspace residual is computed and stored.

    Returns
    -------
    SpectralBasis
        ``Y`` with ``Y.T @ diag(w) @ Y = I`` and ``Y[:, 0]`` constant. The
        input column that becomes dependent once the constant vector is
        placed first is the one dropped.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("basis must be a 2-d array")
    n, m = X.shape
    w = uniform_density(n) if w is None else as_density(w, n)
    sw = np.sqrt(w)
    Y = sw[:, None] * X

    Qy, ratios = _gram_schmidt(Y)
    bad = np.flatnonzero(ratios <= rank_tol)
    if bad.size:
        raise RankDeficient(int(bad[0]))

    # u is the weighted image of the constant vector; find the first prefix of
    # columns whose span contains it.
    u = sw / np.linalg.norm(sw)
    coef = Qy.T @ u
    tail = np.sqrt(np.cumsum((coef ** 2)[::-1])[::-1])
    if np.linalg.norm(u - Qy @ coef) > span_tol:
        raise ConstantVectorNotInSpan("the constant vector is not in the span of the basis")
    inside = np.flatnonzero(np.append(tail[1:], 0.0) <= span_tol)
    drop = int(inside[0])

    keep = [k for k in range(m) if k != drop]
    Q, _ = _gram_schmidt(np.column_stack([u] + [Y[:, k] for k in keep]))
    out = Q / sw[:, None]
    out[:, 0] = 1.0 / np.sqrt(w.sum())

    # out = X @ T, found in the weighted inner product
    T = np.linalg.lstsq(Y, sw[:, None] * out, rcond=None)[0]
    if block_spectrum is None:
        L = np.full((m, m), np.nan)
    else:
        L = np.linalg.solve(T, np.asarray(block_spectrum, dtype=float) @ T)
    basis = SpectralBasis(out, L, w, spectrum, float("nan"), drop)
    if P is not None and block_spectrum is not None:
        basis = SpectralBasis(out, L, w, spectrum, subspace_residual(P, basis), drop)
    return basis


def subspace_residual(P, X, block_spectrum=None) -> float:
    """Relative invariant-subspace defect ``||P X - X L||_F / ||X||_F``."""
    if isinstance(X, SpectralBasis):
        X, L = X.vectors, X.block_spectrum if block_spectrum is None else block_spectrum
    else:
        L = block_spectrum
    X = np.asarray(X, dtype=float)
    L = np.asarray(L, dtype=float)
    n = P.dim if isinstance(P, StochasticMatrix) else np.shape(P)[0]
    if X.ndim != 2 or X.shape[0] != n or L.shape != (X.shape[1], X.shape[1]):
        raise DimensionMismatch(f"P is {n} x {n}, X is {X.shape}, L is {L.shape}")
    PX = P.matmul(X) if isinstance(P, StochasticMatrix) else np.asarray(P) @ X
    return float(np.linalg.norm(PX - X @ L) / np.linalg.norm(X))


# -- conveniences ----------------------------------------------------------

def stationary_density(P) -> np.ndarray:
    """Normalized left Perron eigenvector; must be strictly positive."""
    evals, evecs = sla.eig(_dense(P).T)
    k = int(np.argmin(np.abs(evals - 1.0)))
    pi = evecs[:, k].real
    pi = pi / pi.sum()
    if not np.all(pi > 0):
        raise ValidationError("stationary density is not strictly positive; "
                              "use the uniform weight instead")
    return pi / pi.sum()


def resolve_weight(P, weight) -> np.ndarray:
    """Turn ``"uniform"``, ``"stationary"`` or an array into a density."""
    n = P.dim if isinstance(P, StochasticMatrix) else np.shape(P)[0]
    if weight is None or (isinstance(weight, str) and weight == "uniform"):
        return uniform_density(n)
    if isinstance(weight, str):
        if weight == "stationary":
            return stationary_density(P)
        raise ValidationError(f"unknown weight choice {weight!r}")
    return as_density(weight, n)


def spectral_basis(P: StochasticMatrix, n_clusters: int, mode: str = REAL,
                   weight="uniform", cond_cap: float = COND_CAP,
                   decomposition=None) -> SpectralBasis:
    """Eigenpairs, realification and orthonormalization in one call.

    ``decomposition`` may hold a precomputed ``(evals, evecs)`` from
    :func:`eigendecomposition` so that several cluster counts can share it.
    """
    selection = EigenSelection(mode, n_clusters)
    if decomposition is None:
        spectrum, V = dominant_eigenpairs(P, selection, cond_cap=cond_cap)
    else:
        spectrum, V = select_eigenpairs(*decomposition, selection)
    X, L, _ = realify(V, spectrum)
    w = weight if isinstance(weight, np.ndarray) else resolve_weight(P, weight)
    return orthonormalize(X, w, L, spectrum=spectrum, P=P)


def circular_check(P, blocks: int, tol: float = 1e-8) -> dict:
    """Check the spectrum of a block-circular matrix against roots of unity.

    For each ``exp(2 pi i k / blocks)`` the distance to the nearest computed
    eigenvalue is reported, together with the largest per-block standard
    deviation of the corresponding (max-normalized) eigenvector.
    """
    dense = _dense(P)
    n = dense.shape[0]
    if blocks < 1 or n % blocks:
        raise DimensionMismatch(f"{n} states cannot be split into {blocks} equal blocks")
    size = n // blocks
    evals, evecs = sla.eig(dense)
    roots = np.exp(2j * np.pi * np.arange(blocks) / blocks)
    eig_err, block_std = [], []
    for r in roots:
        k = int(np.argmin(np.abs(evals - r)))
        eig_err.append(float(abs(evals[k] - r)))
        v = _phase_normalize(evecs[:, k])
        v = v / np.abs(v).max()
        block_std.append(float(np.abs(v.reshape(blocks, size)
                                      - v.reshape(blocks, size).mean(axis=1, keepdims=True)).max()
                               if size > 1 else 0.0))
    return {
        "blocks": blocks,
        "roots": [[float(r.real), float(r.imag)] for r in roots],
        "max_eigenvalue_error": max(eig_err),
        "max_block_deviation": max(block_std),
        "passed": bool(max(eig_err) <= tol and max(block_std) <= tol),
    }
