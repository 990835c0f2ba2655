import itertools
import json

import numpy as np
import pytest
from scipy.optimize import minimize

from cpcca.errors import (AllCandidatesSkipped, EmptyRange, InfeasibleScaling,
                          InvalidSelection, NoConvergence, SingularDc, SingularProjection)
from cpcca.matrix import fixture, generate_nearly_uncoupled
from cpcca.pcca import (METHODS, cluster, coarse_grain, crispness_terms, feasibilize,
                        inner_simplex_guess, min_chi, objective, optimize, select_n_clusters)
from cpcca.spectral import SpectralBasis, spectral_basis

from conftest import CYCLE3, aligned_max_diff

# Regression anchors recorded from this implementation (example1, n_c = 3, real part).
EX1_MIN_CHI = -0.007377784866211937
EX1_VERTICES = (1, 5, 3)
EX1_INITIAL_OBJECTIVE = 0.16414463379677757
EX1_OBJECTIVE_GN = 0.12501493252264595


@pytest.fixture(scope="module")
def ex1_basis():
    return spectral_basis(fixture("example1"), 3, "real")


@pytest.fixture(scope="module")
def decoupled():
    return generate_nearly_uncoupled(3, 4, 0.0, seed=5)


def _two_state_basis():
    X = np.array([[1.0, -1.0], [1.0, 1.0]])
    return SpectralBasis(X, np.eye(2), np.array([0.5, 0.5]))


# -- inner simplex ---------------------------------------------------------

def test_isa_decoupled_is_characteristic(decoupled):
    basis = spectral_basis(decoupled, 3, "real")
    A0, vertices = inner_simplex_guess(basis)
    chi = basis.vectors @ A0
    assert np.abs(chi - np.round(chi)).max() <= 1e-12
    assert sorted(v // 4 for v in vertices) == [0, 1, 2]
    assert abs(min_chi(basis)) <= 1e-12


def test_isa_example1_regression(ex1_basis):
    _, vertices = inner_simplex_guess(ex1_basis)
    assert vertices == EX1_VERTICES
    assert min_chi(ex1_basis) >= -0.05
    assert min_chi(ex1_basis) == pytest.approx(EX1_MIN_CHI, abs=1e-12)


def test_isa_single_cluster():
    basis = spectral_basis(fixture("example1"), 1, "real")
    A0, _ = inner_simplex_guess(basis)
    np.testing.assert_allclose(A0, [[1.0 / basis.vectors[0, 0]]])
    np.testing.assert_allclose(basis.vectors @ A0, 1.0, atol=1e-15)


def test_min_chi_decoupled_two_clusters(decoupled):
    # the three-dimensional unit eigenspace is cut to two columns, which still
    # form an exact simplex: the value is zero up to rounding
    basis = spectral_basis(decoupled, 2, "real")
    assert abs(min_chi(basis)) <= 1e-12


def _best_vertex_simplex(X):
    """Brute-force oracle: the row triple whose simplex best contains all rows."""
    best = (-np.inf, None)
    for t in itertools.combinations(range(X.shape[0]), X.shape[1]):
        V = X[list(t)]
        if abs(np.linalg.det(V)) < 1e-10:
            continue
        best = max(best, ((X @ np.linalg.inv(V)).min(), t))
    return best


@pytest.mark.parametrize("name", ["example2:0.9:0.1", "example2:0.1:0.9"])
def test_min_chi_real_part_cases_match_oracle(name):
    basis = spectral_basis(fixture(name), 3, "real")
    value, triple = _best_vertex_simplex(basis.vectors)
    assert triple == (1, 4, 7)
    assert sorted(inner_simplex_guess(basis)[1]) == list(triple)
    assert min_chi(basis) == pytest.approx(value, abs=1e-14)
    assert abs(min_chi(basis)) <= 1e-12


def test_weak_case_shows_in_crispness_not_min_chi():
    strong = cluster(fixture("example2:0.9:0.1"), 3, "real")
    weak = cluster(fixture("example2:0.1:0.9"), 3, "real")
    assert weak.crispness < strong.crispness - 0.3
    assert abs(min_chi(weak.basis)) <= 1e-12


# -- feasibility -----------------------------------------------------------

def test_feasibilize_two_state_identity():
    basis = _two_state_basis()
    for a in (0.7, 3.0):
        A = feasibilize(np.array([[0.0, 0.0], [0.0, a]]), basis)
        np.testing.assert_allclose(basis.vectors @ A, np.eye(2), atol=1e-15)
    A = feasibilize(np.array([[0.0, 0.0], [0.0, -0.4]]), basis)
    np.testing.assert_allclose(basis.vectors @ A, np.eye(2)[::-1], atol=1e-15)


def test_feasibilize_keeps_feasible_isa(decoupled):
    basis = spectral_basis(decoupled, 3, "real")
    A0, _ = inner_simplex_guess(basis)
    assert np.abs(feasibilize(A0, basis) - A0).max() <= 1e-12


def test_feasibilize_random_blocks_on_example1(ex1_basis):
    rng = np.random.default_rng(8)
    for _ in range(50):
        A = np.zeros((3, 3))
        A[1:, 1:] = rng.standard_normal((2, 2))
        try:
            A = feasibilize(A, ex1_basis)
        except InfeasibleScaling:
            continue
        chi = ex1_basis.vectors @ A
        assert chi.min() >= -1e-12
        assert np.abs(chi.sum(axis=1) - 1).max() <= 1e-12
        np.testing.assert_allclose(A.sum(axis=1), [1, 0, 0], atol=1e-12)


def test_feasibilize_zero_block_is_infeasible(ex1_basis):
    with pytest.raises(InfeasibleScaling):
        feasibilize(np.zeros((3, 3)), ex1_basis)


# -- objective -------------------------------------------------------------

def test_objective_crisp_and_uniform():
    rng = np.random.default_rng(9)
    n, m = 12, 3
    w = rng.random(n) + 0.1
    w /= w.sum()
    labels = np.arange(n) % m
    crisp = np.eye(m)[labels]
    uniform = np.full((n, m), 1.0 / m)
    I = SpectralBasis(np.eye(n), np.eye(n), w)
    # objective() multiplies the basis by A; with X = I, A is chi itself
    assert objective(crisp, I) == pytest.approx(0.0, abs=1e-15)
    assert objective(uniform, I) == pytest.approx(m - 1, abs=1e-12)


def test_crispness_terms_zero_cluster():
    with pytest.raises(SingularDc):
        crispness_terms(np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([0.5, 0.5]))


# -- optimization ----------------------------------------------------------

def test_example1_objective_regression(ex1_basis):
    res = optimize(ex1_basis, "gauss-newton")
    assert res.initial_objective == pytest.approx(EX1_INITIAL_OBJECTIVE, abs=1e-12)
    assert res.objective == pytest.approx(EX1_OBJECTIVE_GN, abs=1e-9)
    assert res.crispness > 0.9
    assert res.crispness == pytest.approx((3 - res.objective) / 3, abs=1e-12)


def _powell_oracle(basis):
    """Minimize the trace objective with scipy's Powell; fill and objective coded here."""
    X, w = basis.vectors, basis.weight
    m = X.shape[1]

    def f(x):
        A = np.zeros((m, m))
        A[1:, 1:] = x.reshape(m - 1, m - 1)
        A[1:, 0] = -A[1:, 1:].sum(axis=1)
        A[0] = -(X[:, 1:] @ A[1:]).min(axis=0) / X[0, 0]
        s = A[0].sum() * X[0, 0]
        if s <= 0:
            return float(m)
        chi = X @ (A / s)
        return float(m - np.sum((chi * chi).T @ w / (chi.T @ w)))

    A0 = np.linalg.inv(X[list(inner_simplex_guess(basis)[1])])
    r = minimize(f, A0[1:, 1:].ravel(), method="Powell",
                 options={"xtol": 1e-12, "ftol": 1e-14, "maxfev": 100000})
    return r.fun


def test_optimizers_agree_with_powell_oracle(ex1_basis):
    ref = _powell_oracle(ex1_basis)
    values = {m: optimize(ex1_basis, m).objective for m in METHODS}
    for m, v in values.items():
        assert abs(v - ref) <= 1e-6, m
    assert abs(values["nelder-mead"] - values["gauss-newton"]) <= 1e-6


@pytest.mark.parametrize("method", METHODS)
def test_case_i_sets(method):
    res = cluster(fixture("example2:0.9:0.1"), 3, "magnitude", method=method)
    groups = {frozenset(np.flatnonzero(res.chi[:, j] > 0.99) + 1) for j in range(3)}
    assert groups == {frozenset({1, 6, 8}), frozenset({2, 4, 9}), frozenset({3, 5, 7})}
    assert aligned_max_diff(res.coarse_matrix, CYCLE3) <= 1e-2


def test_case_iii_cyclic():
    res = cluster(fixture("example2:0.1:0.9"), 3, "magnitude")
    assert aligned_max_diff(res.coarse_matrix, CYCLE3) <= 1e-2


@pytest.mark.parametrize("method", METHODS)
def test_decoupled_optimum(decoupled, method):
    res = cluster(decoupled, 3, "real", method=method)
    assert res.objective == pytest.approx(0.0, abs=1e-12)
    assert res.crispness == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(res.coarse_matrix, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_optimize_never_worse_and_feasible(ex1_basis, method):
    res = optimize(ex1_basis, method)
    assert res.objective <= res.initial_objective + 1e-12
    assert res.chi.min() >= 0.0
    assert np.abs(res.chi.sum(axis=1) - 1).max() <= 1e-10
    assert 0.0 <= res.objective <= 2.0 + 1e-12


def test_optimize_single_cluster():
    basis = spectral_basis(fixture("example1"), 1, "real")
    res = optimize(basis)
    np.testing.assert_array_equal(res.chi, np.ones((6, 1)))
    np.testing.assert_array_equal(res.coarse_matrix, [[1.0]])
    assert res.crispness == 1.0


def test_strict_iteration_cap(ex1_basis):
    res = optimize(ex1_basis, "nelder-mead", max_evals=3)
    assert not res.converged
    with pytest.raises(NoConvergence):
        optimize(ex1_basis, "nelder-mead", max_evals=3, strict=True)
    with pytest.raises(NoConvergence):
        optimize(ex1_basis, "gauss-newton", max_iter=1, strict=True)


def test_unknown_method(ex1_basis):
    with pytest.raises(InvalidSelection):
        optimize(ex1_basis, "bfgs")


def test_coarse_matrix_from_basis_matches_projection(ex1_basis):
    P = fixture("example1")
    res = optimize(ex1_basis)
    np.testing.assert_allclose(res.coarse_matrix, coarse_grain(P, res.chi), atol=1e-8)


# -- coarse graining -------------------------------------------------------

def test_coarse_grain_identity_membership():
    P = fixture("example1")
    np.testing.assert_allclose(coarse_grain(P, np.eye(6)), P.toarray(), atol=1e-15)


def test_coarse_grain_rows_sum_to_one():
    res = cluster(fixture("example1"), 3, "real")
    np.testing.assert_allclose(res.coarse_matrix.sum(axis=1), 1.0, atol=1e-8)


def test_coarse_grain_singular():
    chi = np.array([[1.0, 1.0], [1.0, 1.0]]) / 2
    with pytest.raises(SingularProjection):
        coarse_grain(np.eye(2), chi)


# -- cluster-number scan ---------------------------------------------------

def test_scan_example1():
    scan = select_n_clusters(fixture("example1"), "real", range(2, 5))
    assert scan.selected == 3
    assert [e.n_clusters for e in scan.entries] == [2, 3, 4]
    assert scan.entry(2).skipped and scan.entry(4).skipped


def test_scan_case_i_skips_split_pair():
    scan = select_n_clusters(fixture("example2:0.9:0.1"), "magnitude", [2, 3, 4])
    assert scan.entry(2).skipped
    assert "conjugate" in scan.entry(2).reason
    assert scan.selected == 3


@pytest.mark.parametrize("k", [2, 3, 4])
def test_scan_decoupled(k):
    P = generate_nearly_uncoupled(k, 3, 0.0, seed=k)
    scan = select_n_clusters(P, "real", range(2, k + 2))
    assert scan.selected == k
    assert scan.entry(k).crispness == pytest.approx(1.0, abs=1e-10)


def test_scan_errors():
    P = fixture("example1")
    with pytest.raises(EmptyRange):
        select_n_clusters(P, "real", [])
    with pytest.raises(InvalidSelection):
        select_n_clusters(P, "real", [1, 2])
    with pytest.raises(AllCandidatesSkipped):
        select_n_clusters(P, "real", [2, 4])


def test_scan_flags_below_threshold():
    scan = select_n_clusters(fixture("example1"), "real", [3], min_chi_threshold=0.0)
    assert scan.entry(3).flagged
    scan = select_n_clusters(fixture("example1"), "real", [3])
    assert not scan.entry(3).flagged


# -- serialization ---------------------------------------------------------

def test_result_json_schema():
    res = cluster(fixture("example1"), 3, "real")
    d = json.loads(res.to_json())
    assert d["eigenvalues"][1] == pytest.approx([0.9557, 0.0177], abs=5e-4)
    assert len(d["membership"]) == 6 and len(d["membership"][0]) == 3
    assert set(d["timing"]) == {"spectral", "optimize", "coarse_grain", "total"}
    assert "timing" not in res.to_dict(timing=False)
