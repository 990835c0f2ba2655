"""PCCA+ fuzzy clustering on a real invariant subspace.

Memberships are ``chi = X @ A`` for a basis ``X`` (first column constant) and
an n_c x n_c transformation ``A``. Only the lower-right (n_c-1) x (n_c-1)
block of ``A`` is free; the first row and column are completed by
:func:`feasibilize` so that ``chi`` is nonnegative and its rows sum to one.

The objective is ``n_c - trace(diag(chi.T w)^-1 chi.T diag(w) chi)``, which is
zero for crisp (0/1) memberships and ``n_c - 1`` for uniform ones. Crispness
is ``1 - objective / n_c``.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import optimize as _opt
from .errors import (AllCandidatesSkipped, DegenerateSimplex, EmptyRange,
                     InfeasibleScaling, InvalidSelection, NoConvergence,
                     SingularDc, SingularProjection, SplitConjugatePair)
from .matrix import StochasticMatrix, uniform_density
from .spectral import (COND_CAP, SpectralBasis, eigendecomposition,
                       normalize_mode, resolve_weight, spectral_basis)

METHODS = ("nelder-mead", "gauss-newton", "levenberg-marquardt")
FEAS_TOL = 1e-12
MIN_CHI_THRESHOLD = -0.1

__all__ = [
    "ClusteringResult", "ClusterScan", "ScanEntry", "inner_simplex_guess",
    "feasibilize", "objective", "crispness_terms", "min_chi", "optimize",
    "coarse_grain", "select_n_clusters", "cluster", "METHODS",
]


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    """Outcome of one PCCA+ run.

    ``chi`` are the memberships (N x n_c), ``transform`` the matrix ``A``,
    ``coarse_matrix`` the n_c x n_c propagator. ``timings`` holds wall-clock
    seconds per stage and is the only nondeterministic field.
    """
    chi: np.ndarray
    transform: np.ndarray
    coarse_matrix: np.ndarray
    objective: float
    crispness: float
    iterations: int
    evaluations: int
    converged: bool
    method: str
    vertex_indices: tuple
    basis: SpectralBasis
    initial_objective: float = float("nan")
    timings: dict = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return self.chi.shape[1]

    @property
    def eigenvalues(self):
        sp = self.basis.spectrum
        return None if sp is None else sp.eigenvalues

    @property
    def residual(self) -> float:
        return self.basis.residual

    @property
    def assignments(self) -> np.ndarray:
        """Index of the cluster with the largest membership for every state."""
        return np.argmax(self.chi, axis=1)

    def to_dict(self, membership=True, timing=True) -> dict:
        d = {
            "n_clusters": self.n_clusters,
            "method": self.method,
            "eigenvalues": (None if self.eigenvalues is None else
                            [[float(z.real), float(z.imag)] for z in self.eigenvalues]),
            "selection_mode": (None if self.basis.spectrum is None
                               else self.basis.spectrum.selection.mode),
            "objective": float(self.objective),
            "crispness": float(self.crispness),
            "initial_objective": float(self.initial_objective),
            "residual": float(self.residual),
            "vertex_indices": [int(i) for i in self.vertex_indices],
            "iterations": int(self.iterations),
            "evaluations": int(self.evaluations),
            "converged": bool(self.converged),
            "transform": self.transform.tolist(),
            "coarse_matrix": self.coarse_matrix.tolist(),
        }
        if membership:
            d["membership"] = self.chi.tolist()
        if timing:
            d["timing"] = {k: float(v) for k, v in sorted(self.timings.items())}
        return d

    def to_json(self, **kwargs) -> str:
        indent = kwargs.pop("indent", 2)
        return json.dumps(self.to_dict(**kwargs), indent=indent, sort_keys=True)


# -- initial guess ---------------------------------------------------------

def inner_simplex_guess(basis):
    """Pick n_c rows of ``X`` as simplex vertices and invert them.

    The first vertex is the row of largest norm; each further vertex is the
    row farthest from the affine hull of the ones already chosen.

    Returns
    -------
    A0 : ndarray, shape (n_c, n_c)
    vertices : tuple of int
    """
    X = basis.vectors if isinstance(basis, SpectralBasis) else np.asarray(basis, dtype=float)
    n, m = X.shape
    first = int(np.argmax(np.linalg.norm(X, axis=1)))
    if m == 1:
        return np.array([[1.0 / X[first, 0]]]), (first,)
    shifted = X - X[first]
    vertices = [first]
    for k in range(1, m):
        if k > 1:
            d = shifted[vertices[-1]]
            d = d / np.linalg.norm(d)
            shifted = shifted - np.outer(shifted @ d, d)
        dist = np.linalg.norm(shifted, axis=1)
        nxt = int(np.argmax(dist))
        if dist[nxt] <= 1e-14 * max(1.0, np.abs(X).max()):
            raise DegenerateSimplex(f"rows of X span fewer than {m} affine dimensions")
        vertices.append(nxt)
    V = X[vertices]
    if np.linalg.cond(V) > COND_CAP:
        raise DegenerateSimplex("simplex vertex matrix is singular")
    return np.linalg.inv(V), tuple(vertices)


# -- feasibility -----------------------------------------------------------

def _fill(inner, X):
    """Complete the first row/column of A from its inner block (no checks)."""
    m = X.shape[1]
    A = np.zeros((m, m))
    A[1:, 1:] = inner
    A[1:, 0] = -inner.sum(axis=1)
    x11 = X[0, 0]
    A[0, :] = -np.min(X[:, 1:] @ A[1:, :], axis=0) / x11
    total = A[0].sum() * x11
    return A, total


def feasibilize(A, basis, tol: float = FEAS_TOL) -> np.ndarray:
    """Complete ``A`` so that ``X @ A`` is a feasible membership matrix.

    Only ``A[1:, 1:]`` is read. Rows 2..n_c get a first entry making them sum
    to zero; row 1 is set to the smallest shift that makes every column of
    ``X @ A`` nonnegative; then ``A`` is rescaled so the rows of ``X @ A`` sum
    to one. With an all-ones first column in ``X`` this gives ``A @ 1 = e_1``.

    Raises
    ------
    InfeasibleScaling
        If the rescaling is degenerate, or the resulting memberships violate
        positivity or partition of unity by more than ``tol``.
    """
    X = basis.vectors if isinstance(basis, SpectralBasis) else np.asarray(basis, dtype=float)
    A = np.asarray(A, dtype=float)
    m = X.shape[1]
    if A.shape != (m, m):
        raise InfeasibleScaling(f"A has shape {A.shape}, expected {(m, m)}")
    if m == 1:
        return np.array([[1.0 / X[0, 0]]])
    A, total = _fill(A[1:, 1:], X)
    scale = np.abs(A[1:, 1:]).max() * np.abs(X).max()
    if not np.isfinite(total) or total <= 1e-10 * max(scale, 1e-300):
        raise InfeasibleScaling(f"row-1 scaling factor {total!r} is not positive")
    A = A / total
    chi = X @ A
    if not np.all(np.isfinite(chi)):
        raise InfeasibleScaling("non-finite memberships")
    neg = chi.min()
    drift = np.abs(chi.sum(axis=1) - 1.0).max()
    if neg < -tol or drift > tol:
        raise InfeasibleScaling(f"memberships infeasible after completion "
                                f"(min {neg:.2e}, row-sum drift {drift:.2e})")
    return A


# -- objective -------------------------------------------------------------

def crispness_terms(chi, w) -> np.ndarray:
    """Diagonal of ``diag(chi.T w)^-1 chi.T diag(w) chi``."""
    mass = chi.T @ w
    if np.any(mass <= 0):
        raise SingularDc("a cluster carries zero total weight")
    return ((chi * chi).T @ w) / mass


def objective(A, basis) -> float:
    """``n_c - trace(D_c^-2 chi^T D^2 chi)`` for ``chi = X A``."""
    chi = basis.vectors @ np.asarray(A, dtype=float)
    return float(chi.shape[1] - crispness_terms(chi, basis.weight).sum())


def min_chi(basis) -> float:
    """Smallest entry of the unoptimized inner-simplex memberships."""
    A0, _ = inner_simplex_guess(basis)
    return float((basis.vectors @ A0).min())


# -- optimization ----------------------------------------------------------

class _Problem:
    """Objective over the free inner block; infeasible candidates score n_c."""

    def __init__(self, basis):
        self.basis = basis
        self.m = basis.n_clusters

    def transform(self, x):
        inner = np.asarray(x, dtype=float).reshape(self.m - 1, self.m - 1)
        A = np.zeros((self.m, self.m))
        A[1:, 1:] = inner
        return feasibilize(A, self.basis)

    def terms(self, x):
        try:
            A = self.transform(x)
            return crispness_terms(self.basis.vectors @ A, self.basis.weight)
        except (InfeasibleScaling, SingularDc):
            return np.zeros(self.m)

    def value(self, x):
        return float(self.m - self.terms(x).sum())

    def residual(self, x):
        return np.sqrt(np.maximum(0.0, 1.0 - self.terms(x)))


def optimize(basis: SpectralBasis, method: str = "nelder-mead", P=None,
             max_evals=None, max_iter=None, strict=False) -> ClusteringResult:
    """Locally minimize the PCCA+ objective starting from the inner simplex.

    Parameters
    ----------
    basis : SpectralBasis
    method : {"nelder-mead", "gauss-newton", "levenberg-marquardt"}
    P : StochasticMatrix, optional
        When given, the coarse matrix is computed from ``P`` directly;
        otherwise it is ``A^-1 L A`` from the basis' block spectrum.
    max_evals : int, optional
        Nelder-Mead evaluation cap (default ``200 * (n_c - 1)**2``).
    max_iter : int, optional
        Iteration cap for the least-squares methods.
    strict : bool
        Raise NoConvergence instead of returning ``converged=False``.
    """
    if method not in METHODS:
        raise InvalidSelection(f"unknown method {method!r}; choose from {METHODS}")
    m = basis.n_clusters
    w = basis.weight
    if m == 1:
        A = np.array([[1.0 / basis.vectors[0, 0]]])
        chi = np.ones((basis.dim, 1))
        return ClusteringResult(chi, A, np.ones((1, 1)), 0.0, 1.0, 0, 0, True, method,
                                (0,), basis, 0.0)

    A0, vertices = inner_simplex_guess(basis)
    prob = _Problem(basis)
    x0 = A0[1:, 1:].ravel()
    try:
        A_init = prob.transform(x0)
    except InfeasibleScaling as exc:
        raise DegenerateSimplex(f"initial guess cannot be made feasible: {exc}") from exc
    f_init = objective(A_init, basis)

    if method == "nelder-mead":
        if max_evals is None:
            max_evals = 200 * (m - 1) ** 2
        out = _opt.nelder_mead(prob.value, x0, max_evals=max_evals)
    elif method == "gauss-newton":
        out = _opt.gauss_newton(prob.residual, x0, max_iter=max_iter or 100)
    else:
        out = _opt.levenberg_marquardt(prob.residual, x0, max_iter=max_iter or 200)

    try:
        A = prob.transform(out.x)
        f = objective(A, basis)
    except (InfeasibleScaling, SingularDc):
        A, f = A_init, f_init
    if f > f_init:
        A, f = A_init, f_init
    if strict and not out.converged:
        raise NoConvergence(f"{method} hit its iteration cap")

    chi = basis.vectors @ A
    if chi.min() < -FEAS_TOL:
        raise InfeasibleScaling(f"membership entry {chi.min():.3e} below -{FEAS_TOL}")
    chi = np.clip(chi, 0.0, 1.0)
    chi /= chi.sum(axis=1, keepdims=True)

    if P is None:
        Pc = np.linalg.solve(A, basis.block_spectrum @ A)
    else:
        Pc = coarse_grain(P, chi, w)
    f = float(m - crispness_terms(chi, w).sum())
    return ClusteringResult(chi, A, Pc, f, (m - f) / m, out.iterations, out.evaluations,
                            out.converged, method, vertices, basis, f_init)


# -- coarse graining -------------------------------------------------------

def coarse_grain(P, chi, w=None) -> np.ndarray:
    """``(chi^T D^2 chi)^-1 chi^T D^2 P chi`` with ``D^2 = diag(w)``."""
    chi = np.asarray(chi, dtype=float)
    w = uniform_density(chi.shape[0]) if w is None else np.asarray(w, dtype=float)
    Pchi = P.matmul(chi) if isinstance(P, StochasticMatrix) else np.asarray(P) @ chi
    Wchi = w[:, None] * chi
    S = chi.T @ Wchi
    if np.linalg.cond(S) > COND_CAP:
        raise SingularProjection("chi^T D^2 chi is singular")
    return np.linalg.solve(S, Wchi.T @ Pchi)


# -- cluster-number selection ----------------------------------------------

@dataclass(frozen=True)
class ScanEntry:
    n_clusters: int
    min_chi: float = float("nan")
    crispness: float = float("nan")
    skipped: bool = False
    reason: str = ""
    flagged: bool = False
    selected: bool = False


@dataclass(frozen=True)
class ClusterScan:
    entries: tuple
    selection_mode: str

    @property
    def selected(self) -> int:
        return next(e.n_clusters for e in self.entries if e.selected)

    def entry(self, n_clusters) -> ScanEntry:
        return next(e for e in self.entries if e.n_clusters == n_clusters)

    def to_dict(self) -> dict:
        return {"selection_mode": self.selection_mode, "selected": self.selected,
                "candidates": [e.__dict__ for e in self.entries]}


def select_n_clusters(P: StochasticMatrix, mode: str = "real", candidates=None,
                      weight="uniform", method: str = "nelder-mead",
                      min_chi_threshold: float = MIN_CHI_THRESHOLD,
                      cond_cap: float = COND_CAP, tie_tol: float = 1e-10) -> ClusterScan:
    """Scan candidate cluster numbers and pick the crispest.

    For every candidate the inner-simplex ``min_chi`` is recorded (``flagged``
    when it falls below ``min_chi_threshold``) and a quick optimization gives
    the crispness. Candidates that would split a conjugate pair are skipped.
    Ties in crispness go to the smaller cluster number.
    """
    mode = normalize_mode(mode)
    n = P.dim
    candidates = sorted(set(range(2, min(n - 1, 6) + 1) if candidates is None
                            else (int(c) for c in candidates)))
    if not candidates:
        raise EmptyRange("no candidate cluster numbers")
    if candidates[0] < 2 or candidates[-1] > n - 1:
        raise InvalidSelection(f"candidates must lie in [2, {n - 1}]")
    decomposition = eigendecomposition(P, cond_cap)
    w = resolve_weight(P, weight)
    entries = []
    for nc in candidates:
        try:
            basis = spectral_basis(P, nc, mode, w, decomposition=decomposition)
        except SplitConjugatePair:
            entries.append(ScanEntry(nc, skipped=True, reason="splits a conjugate pair"))
            continue
        mc = min_chi(basis)
        try:
            res = optimize(basis, method, P=P)
            crisp = res.crispness
        except (DegenerateSimplex, InfeasibleScaling, SingularDc, SingularProjection) as exc:
            entries.append(ScanEntry(nc, mc, skipped=True, reason=exc.code,
                                     flagged=mc < min_chi_threshold))
            continue
        entries.append(ScanEntry(nc, mc, crisp, flagged=mc < min_chi_threshold))
    live = [e for e in entries if not e.skipped]
    if not live:
        raise AllCandidatesSkipped("every candidate cluster number was skipped")
    best = max(e.crispness for e in live)
    chosen = next(e.n_clusters for e in live if e.crispness >= best - tie_tol)
    entries = tuple(ScanEntry(**{**e.__dict__, "selected": e.n_clusters == chosen})
                    for e in entries)
    return ClusterScan(entries, mode)


def cluster(P: StochasticMatrix, n_clusters: int, mode: str = "real", weight="uniform",
            method: str = "nelder-mead", cond_cap: float = COND_CAP,
            **optimize_opts) -> ClusteringResult:
    """Full pipeline: spectral basis, optimization and coarse graining."""
    t0 = time.perf_counter()
    basis = spectral_basis(P, n_clusters, mode, weight, cond_cap=cond_cap)
    t1 = time.perf_counter()
    res = optimize(basis, method, **optimize_opts)
    t2 = time.perf_counter()
    Pc = coarse_grain(P, res.chi, basis.weight)
    t3 = time.perf_counter()
    timings = {"spectral": t1 - t0, "optimize": t2 - t1, "coarse_grain": t3 - t2,
               "total": t3 - t0}
    return ClusteringResult(res.chi, res.transform, Pc, res.objective, res.crispness,
                            res.iterations, res.evaluations, res.converged, method,
                            res.vertex_indices, basis, res.initial_objective, timings)
