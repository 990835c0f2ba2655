import itertools

import numpy as np
import pytest

from cpcca.spectral import orthonormalize


def aligned_max_diff(A, B):
    """Smallest max-abs difference between A and a relabeling of B."""
    A, B = np.asarray(A), np.asarray(B)
    n = A.shape[0]
    return min(np.abs(A - B[np.ix_(q, q)]).max()
               for q in itertools.permutations(range(n)))


def symmetric_circulant(diag, a, b):
    """3x3 circulant with the given diagonal and off-diagonals a (one step), b."""
    return np.array([[diag, a, b], [b, diag, a], [a, b, diag]])


CYCLE3 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])


def random_basis(rng, n, m, w=None):
    """Weighted-orthonormal basis of [1, random columns] (no matrix attached)."""
    X = np.column_stack([np.ones(n), rng.standard_normal((n, m - 1))])
    if w is None:
        w = rng.random(n) + 0.05
        w /= w.sum()
    return orthonormalize(X, w, np.eye(m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    """Store one PASS/FAIL line; printed again in the terminal summary."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append((number, line))
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
