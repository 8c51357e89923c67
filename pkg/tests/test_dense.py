import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectraldc import dense
from spectraldc.dense import EPS
from spectraldc.ledger import CostLedger, null_ledger


def orth_err(Q):
    k = min(Q.shape)
    G = Q.conj().T @ Q if Q.shape[0] >= Q.shape[1] else Q @ Q.conj().T
    return np.linalg.norm(G - np.eye(k))


# matmul -------------------------------------------------------------------

def test_matmul_identity_and_hand_value():
    B = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(dense.matmul(np.eye(3), B), B)
    C = dense.matmul(np.array([[1.0, 2], [3, 4]]), np.array([[5.0], [6]]))
    assert np.array_equal(C, [[17.0], [39.0]])


def test_matmul_errors():
    with pytest.raises(dense.DimensionError):
        dense.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(dense.ScalarKindError):
        dense.matmul(np.ones((2, 2)), np.ones((2, 2)) * 1j)


def _reference_block_words(n, M):
    """Replay the tile loop with an explicit LRU set (independent of CostLedger)."""
    from collections import OrderedDict
    b = int(math.isqrt(M // 3))
    tiles = [(s, min(s + b, n)) for s in range(0, n, b)]
    cache, used, words = OrderedDict(), 0, 0
    def touch(key, size):
        nonlocal used, words
        if key in cache:
            cache.move_to_end(key)
            return
        words += size
        cache[key] = size
        used += size
        while used > M:
            used -= cache.popitem(last=False)[1]
    for ii, (i0, i1) in enumerate(tiles):
        for jj, (j0, j1) in enumerate(tiles):
            touch(("C", ii, jj), (i1 - i0) * (j1 - j0))
            for kk, (k0, k1) in enumerate(tiles):
                touch(("A", ii, kk), (i1 - i0) * (k1 - k0))
                touch(("B", kk, jj), (k1 - k0) * (j1 - j0))
    return words


def test_matmul_words_bound_and_reference(rng):
    n, M = 64, 256
    A, B = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    led = CostLedger(M=M)
    C = dense.matmul(A, B, led)
    assert np.allclose(C, A @ B)
    assert led.words_moved <= 8 * n ** 3 / math.sqrt(M)
    assert led.words_moved == _reference_block_words(n, M)
    assert led.flops == 2 * n ** 3


def test_matmul_associativity(rng):
    n = 40
    A, B, C = (rng.standard_normal((n, n)) for _ in range(3))
    lhs = dense.matmul(dense.matmul(A, B), C)
    rhs = dense.matmul(A, dense.matmul(B, C))
    bound = 64 * n * EPS * np.prod([np.linalg.norm(X, 2) for X in (A, B, C)])
    assert np.linalg.norm(lhs - rhs, 2) <= bound


def test_ledger_neutrality(rng):
    A = rng.standard_normal((50, 30))
    B = rng.standard_normal((30, 20))
    for M in (48, 300):
        off, on = null_ledger(M), CostLedger(M=M)
        F1, F2 = dense.factorize(A, "QR", off), dense.factorize(A, "QR", on)
        assert np.array_equal(F1.triangular, F2.triangular)
        assert np.array_equal(dense.explicit_q(F1, off), dense.explicit_q(F2, on))
        assert np.array_equal(dense.matmul(A, B, off), dense.matmul(A, B, on))
        assert on.words_moved > 0 and off.words_moved == 0


# factorizations ------------------------------------------------------------

@pytest.mark.parametrize("mode", ["QR", "RQ", "QL", "LQ"])
@pytest.mark.parametrize("cplx", [False, True])
def test_factorize_modes(mode, cplx, rng):
    shape = (32, 16) if mode in ("QR", "QL") else (16, 32)
    A = rng.standard_normal(shape)
    if cplx:
        A = A + 1j * rng.standard_normal(shape)
    F = dense.factorize(A, mode, CostLedger(M=192))
    R = F.triangular
    n = max(shape)
    tol = 64 * n * EPS * np.linalg.norm(A)
    assert np.linalg.norm(dense.reassemble(F) - A) <= min(tol, 1e-12 * np.linalg.norm(A))
    if mode in ("QR", "RQ"):
        assert np.abs(np.tril(R, -1)).max(initial=0) <= tol
    else:
        assert np.abs(np.triu(R, 1)).max(initial=0) <= tol
    assert orth_err(dense.explicit_q(F)) <= 64 * n * EPS


def test_factorize_large_reconstruction(rng):
    A = rng.standard_normal((256, 256))
    F = dense.factorize(A, "QR", CostLedger(M=3 * 32 * 32))
    assert np.linalg.norm(dense.reassemble(F) - A) <= 64 * 256 * EPS * np.linalg.norm(A)


def test_factorize_simple_cases():
    F = dense.factorize(np.eye(4), "QR")
    Q = dense.explicit_q(F)
    assert np.allclose(np.abs(Q), np.eye(4))
    assert np.allclose(np.abs(F.triangular), np.eye(4))
    F = dense.factorize(np.array([[3.0], [4.0]]), "QR")
    assert abs(abs(F.triangular[0, 0]) - 5) < 1e-14
    with pytest.raises(dense.DimensionError):
        dense.factorize(np.zeros((0, 0)))
    with pytest.raises(dense.DimensionError):
        dense.factorize(np.ones((2, 3)), "QR")


def test_explicit_q_of_reflector(rng):
    v = rng.standard_normal(6)
    H = np.eye(6) - 2 * np.outer(v, v) / (v @ v)
    F = dense.factorize(H, "QR")
    Q = dense.explicit_q(F)
    # Q agrees with H up to column signs
    s = np.sign(np.sum(Q * H, axis=0))
    assert np.allclose(Q * s, H, atol=1e-13)


@given(st.integers(1, 24), st.integers(0, 20), st.integers(0, 2 ** 31))
def test_qr_property(m_extra, n, seed):
    n = max(n, 1)
    A = np.random.default_rng(seed).standard_normal((n + m_extra, n))
    F = dense.factorize(A, "QR", CostLedger(M=48))
    Q = dense.explicit_q(F)
    assert orth_err(Q) <= 64 * (n + m_extra) * EPS
    assert np.linalg.norm(Q @ F.triangular - A) <= 64 * (n + m_extra) * EPS * max(np.linalg.norm(A), 1)


# trsm ----------------------------------------------------------------------

def test_trsm_cases(rng):
    B = rng.standard_normal((4, 3))
    assert np.allclose(dense.trsm(np.eye(4), B), B)
    X = dense.trsm(np.array([[2.0, 1], [0, 4]]), np.array([[5.0], [8]]))
    assert np.allclose(X, [[1.5], [2.0]])
    T = np.triu(rng.standard_normal((32, 32))) + 8 * np.eye(32)
    B = rng.standard_normal((32, 7))
    X = dense.trsm(T, B, CostLedger(M=48))
    assert np.linalg.norm(T @ X - B) <= 1e-12 * np.linalg.norm(B)
    Xr = dense.trsm(T, B.T, right=True)
    assert np.linalg.norm(Xr @ T - B.T) <= 1e-12 * np.linalg.norm(B)
    Xl = dense.trsm(T.T, B, lower=True)
    assert np.linalg.norm(T.T @ Xl - B) <= 1e-12 * np.linalg.norm(B)


def test_trsm_singular():
    T = np.array([[1.0, 2.0], [0.0, 0.0]])
    with pytest.raises(dense.SingularTriangularError):
        dense.trsm(T, np.ones((2, 1)))


# Haar ----------------------------------------------------------------------

def test_haar_basic():
    signs = [float(dense.haar_orthogonal(1, "real64", s)[0, 0]) for s in range(200)]
    assert set(signs) == {-1.0, 1.0}
    assert 60 < sum(s > 0 for s in signs) < 140
    for kind in ("real64", "complex128"):
        V = dense.haar_orthogonal(20, kind, 3)
        assert orth_err(V) <= 64 * 20 * EPS
    assert np.array_equal(dense.haar_orthogonal(5, "real64", 9), dense.haar_orthogonal(5, "real64", 9))


def test_haar_leading_block_scaling():
    n, r = 32, 16
    vals = []
    for s in range(500):
        V = dense.haar_orthogonal(n, "real64", s)
        vals.append(math.sqrt(r * (n - r)) * dense.jacobi_svd(V[:r, :r])[0][-1])
    assert 0.1 <= np.median(vals) <= 3


# Jacobi oracles ------------------------------------------------------------

def test_jacobi_sym_eig_cases(rng):
    w, V = dense.jacobi_sym_eig(np.diag([3.0, 1, 2]))
    assert np.allclose(w, [1, 2, 3])
    w, _ = dense.jacobi_sym_eig(np.array([[0.0, 1], [1, 0]]))
    assert np.allclose(w, [-1, 1])
    S = rng.standard_normal((64, 64))
    S = S + S.T
    w, V = dense.jacobi_sym_eig(S)
    assert abs(w.sum() - np.trace(S)) <= 1e-10 * np.abs(w).sum()
    assert np.linalg.norm(S @ V - V * w) <= 64 * 64 * EPS * np.linalg.norm(S)
    with pytest.raises(ValueError):
        dense.jacobi_sym_eig(np.array([[0.0, 1], [2, 0]]))


def test_jacobi_similarity_invariance(rng):
    S = rng.standard_normal((24, 24))
    S = S + S.T
    Q = dense.haar_orthogonal(24, "real64", 4)
    w1 = dense.jacobi_sym_eig(S)[0]
    w2 = dense.jacobi_sym_eig(Q @ S @ Q.T)[0]
    assert np.abs(w1 - w2).max() <= 1e-10 * np.abs(w1).max()


def test_jacobi_svd_cases(rng):
    assert np.allclose(dense.jacobi_svd(np.diag([2.0, 1]))[0], [2, 1])
    assert np.all(dense.jacobi_svd(np.zeros((3, 3)))[0] == 0)
    A = rng.standard_normal((32, 32))
    s, U, V = dense.jacobi_svd(A)
    w = dense.jacobi_sym_eig(A.T @ A)[0]
    assert np.abs(s - np.sqrt(np.maximum(w[::-1], 0))).max() <= 1e-8 * s[0]
    assert np.linalg.norm(A - (U * s) @ V.conj().T) <= 64 * 32 * EPS * np.linalg.norm(A)
    assert np.all(np.diff(s) <= 0)


# norms and Gershgorin ------------------------------------------------------

def test_norms_and_gershgorin(rng):
    A = np.array([[1.0, -2], [3, 4]])
    assert dense.norms(np.eye(5), "one") == 1
    assert dense.norms(A, "one") == 6
    assert math.isclose(dense.norms(A, "fro"), math.sqrt(30))
    assert dense.gershgorin_radius(np.diag([1.0, -3])) == 3
    assert dense.gershgorin_radius(np.array([[0.0, 1], [1, 0]])) == 1
    for _ in range(10):
        S = rng.standard_normal((8, 8))
        S = S + S.T
        w = dense.jacobi_sym_eig(S)[0]
        assert dense.gershgorin_radius(S) >= np.abs(w).max()


def test_matrix_text_round_trip(tmp_path, rng):
    for A in (rng.standard_normal((3, 4)), rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))):
        p = tmp_path / "m.txt"
        dense.write_matrix(p, A)
        B = dense.read_matrix(p)
        assert np.array_equal(A, B)


@pytest.mark.parametrize("scale", [1e-300, 1e-200, 1e-160, 1.0, 1e160, 1e200, 1e300])
@pytest.mark.parametrize("cplx", [False, True])
def test_house_extreme_scales(scale, cplx):
    x = np.array([0.7, -2.0, 1 / 3, 0.25]) * scale * (1j if cplx else 1)
    with np.errstate(all="raise"):
        v, tau, beta = dense.house(x)
    y = x - np.conj(tau) * v * (v.conj() @ x)
    assert np.abs(y[1:]).max() <= 1e-14 * scale
    assert abs(y[0] - beta) <= 1e-14 * scale
    assert abs(abs(beta) / scale - np.linalg.norm(x / scale)) <= 1e-14
