import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectraldc import dense, trevc
from spectraldc.dense import EPS
from spectraldc.ledger import CostLedger


def separated_triangular(n, rng, cplx=False):
    d = np.linspace(-1, 1, n) + rng.uniform(-0.2, 0.2, n) / n
    T = np.triu(rng.standard_normal((n, n)), 1) * 0.5
    if cplx:
        T = T + 1j * np.triu(rng.standard_normal((n, n)), 1) * 0.5
    return T + np.diag(rng.permutation(d))


def test_diagonal_gives_identity():
    out = trevc.trevc_blocked(np.diag([3.0, -1.0, 2.0, 0.5]))
    assert np.array_equal(out.X, np.eye(4))


def test_two_by_two_by_hand():
    T = np.array([[1.0, 1.0], [0.0, 2.0]])
    raw = trevc.trevc_unblocked(T, normalize=False)
    assert np.array_equal(raw.X, [[1.0, 1.0], [0.0, 1.0]])
    out = trevc.trevc_blocked(T)
    r = 1 / math.sqrt(2)
    assert np.allclose(out.X, [[1, r], [0, r]], atol=1e-15)


@pytest.mark.parametrize("n", [16, 64, 96])
def test_blocked_equals_unblocked(n):
    rng = np.random.default_rng(n)
    for cplx in (False, True):
        T = separated_triangular(n, rng, cplx)
        a = trevc.trevc_blocked(T, CostLedger(M=3 * 8 * 8))
        b = trevc.trevc_unblocked(T)
        assert np.abs(a.X - b.X).max() <= 1e-13 * np.abs(b.X).max()
        assert np.all(np.tril(a.X, -1) == 0)


@given(st.integers(2, 40), st.integers(0, 2 ** 31), st.integers(1, 12))
def test_residual_bound(n, seed, b):
    T = separated_triangular(n, np.random.default_rng(seed))
    out = trevc.trevc_blocked(T, block=b)
    kappa = trevc.separation_condition(T)
    assert out.residual(T) <= 64 * n * EPS * kappa * dense.norms(T, "fro")
    assert np.allclose(np.linalg.norm(out.X, axis=0), 1)


def test_clustered_error_names_pair():
    T = np.triu(np.ones((4, 4)))
    T[np.arange(4), np.arange(4)] = [1.0, 2.0, 3.0, 2.0]
    with pytest.raises(trevc.ClusteredEigenvalueError) as exc:
        trevc.trevc_blocked(T)
    assert exc.value.pair == (1, 3)


def test_rejects_non_triangular():
    with pytest.raises(ValueError):
        trevc.trevc_blocked(np.ones((3, 3)))


def test_back_transform_cases():
    rng = np.random.default_rng(0)
    T = separated_triangular(10, rng)
    X = trevc.trevc_blocked(T)
    assert np.array_equal(trevc.back_transform(np.eye(10), X), X.X)
    Q = dense.haar_orthogonal(6, "real64", 1)
    V = trevc.back_transform(Q, trevc.trevc_blocked(np.diag(np.arange(6.0))))
    assert np.allclose(V, Q)
    with pytest.raises(dense.DimensionError):
        trevc.back_transform(np.eye(3), np.eye(4))


def test_full_pipeline_residual():
    rng = np.random.default_rng(5)
    n = 48
    T = separated_triangular(n, rng, cplx=True)
    Q = dense.haar_orthogonal(n, "complex128", 2)
    A = Q @ T @ Q.conj().T
    out = trevc.trevc_blocked(T)
    V = trevc.back_transform(Q, out)
    kappa = trevc.separation_condition(T)
    nA = np.linalg.norm(A, 2)
    for j in range(n):
        assert np.linalg.norm(A @ V[:, j] - out.D[j] * V[:, j]) <= 1e-9 * nA * kappa


def test_word_count_scaling():
    M = 3 * 16 * 16
    consts = []
    for n in (96, 144, 192):
        T = separated_triangular(n, np.random.default_rng(n))
        led = CostLedger(M=M)
        trevc.trevc_blocked(T, led)
        b = led.blocksize
        consts.append(led.words_moved / (n ** 3 / b + n ** 2 + n * b))
    mid = np.mean(consts)
    assert all(abs(c / mid - 1) <= 0.25 for c in consts), consts
