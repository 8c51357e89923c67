import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectraldc import dense, randurv
from spectraldc.dense import EPS
from spectraldc.ledger import CostLedger


def subspace_sine(U1, U2):
    """Largest principal-angle sine via the projection residual (no 1 - cos^2 cancellation)."""
    P = U2 - U1 @ (U1.conj().T @ U2)
    return dense.jacobi_svd(P)[0][0]


def orth(Q):
    return np.linalg.norm(Q.conj().T @ Q - np.eye(Q.shape[1]))


def gapped(n, r, gap, rng):
    sig = np.r_[np.ones(r), gap * np.ones(n - r)] * 10 ** rng.uniform(0, 0.5, n)
    return dense.haar_orthogonal(n, "real64", rng) @ np.diag(sig) @ dense.haar_orthogonal(n, "real64", rng)


def test_rurv_zero_and_identity():
    f = randurv.rurv(np.zeros((5, 5)), 1)
    assert np.all(f.R == 0)
    assert orth(f.U) < 1e-13 and orth(f.V) < 1e-13
    f = randurv.rurv(np.eye(6), 2)
    assert np.allclose(dense.jacobi_svd(f.R)[0], 1)


@given(st.integers(1, 20), st.integers(0, 2 ** 31), st.booleans())
def test_rurv_reconstruction(n, seed, cplx):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + (1j * rng.standard_normal((n, n)) if cplx else 0)
    f = randurv.rurv(A, seed, CostLedger(M=48))
    nA = np.linalg.norm(A)
    assert np.linalg.norm(f.reassemble() - A) <= 64 * n * EPS * nA
    assert np.abs(np.tril(f.R, -1)).max(initial=0) == 0
    g = randurv.rulv(A, seed)
    assert np.linalg.norm(g.reassemble() - A) <= 64 * n * EPS * nA
    assert np.abs(np.triu(g.R, 1)).max(initial=0) == 0


def test_rurv_deterministic():
    A = np.random.default_rng(0).standard_normal((7, 7))
    f1, f2 = randurv.rurv(A, 11), randurv.rurv(A, 11)
    assert np.array_equal(f1.R, f2.R) and np.array_equal(f1.V, f2.V)


def test_rurv_two_by_two_gap_monte_carlo():
    A = np.diag([1.0, 1e-9])
    hits = sum(abs(randurv.rurv(A, s).R[0, 0]) >= 0.05 for s in range(100))
    assert hits >= 95


def test_rulv_cases():
    g = randurv.rulv(np.zeros((4, 4)), 0)
    assert np.all(g.R == 0)
    g = randurv.rulv(np.eye(4), 0)
    assert orth(g.U) < 1e-13 and orth(g.V) < 1e-13
    # rulv of A^H reveals the gap in its trailing corner
    A = np.diag([1.0, 1e-9])
    hits = sum(abs(randurv.rulv(A.T, s).R[-1, -1]) >= 0.05 for s in range(100))
    assert hits >= 95


def test_rank_gap_report():
    rng = np.random.default_rng(3)
    A = gapped(12, 5, 1e-9, rng)
    r, s11, s22 = randurv.rurv(A, 4, report=True).rank_gap_report
    assert r == 5 and s11 > 1e3 * s22


def test_grurv_single_factor_is_rurv():
    A = np.random.default_rng(1).standard_normal((9, 9))
    U, V, Rs = randurv.grurv([(A, 1)], 5)
    f = randurv.rurv(A, 5)
    assert np.array_equal(U, f.U) and np.array_equal(V, f.V) and np.array_equal(Rs[0], f.R)


def test_grurv_identity_product():
    U, V, Rs = randurv.grurv([(np.eye(6), 1), (np.eye(6), 1)], 3)
    assert orth(U) < 1e-13
    assert np.allclose(dense.jacobi_svd(Rs[0] @ Rs[1])[0], 1)


@pytest.mark.parametrize("exps", [(1, 1), (-1, 1), (1, -1), (-1, -1)])
def test_grurv_matches_explicit_product(exps):
    rng = np.random.default_rng(7)
    n = 16
    A1 = rng.standard_normal((n, n)) + 4 * np.eye(n)
    A2 = rng.standard_normal((n, n)) + 4 * np.eye(n)
    spec = randurv.ProductSpec([(A1, exps[0]), (A2, exps[1])])
    U, V, Rs = randurv.grurv(spec, 9)
    M = spec.explicit()
    # M_k = U R_1^{m1} R_2^{m2} V
    rec = U @ randurv.reassemble_r(Rs, exps) @ V
    assert np.linalg.norm(rec - M) <= 1e-10 * np.linalg.norm(M)
    for R in Rs:
        assert np.abs(np.tril(R, -1)).max() <= 64 * n * EPS * np.linalg.norm(R)
    f = randurv.rurv(M, 9)
    # equal up to column phases
    d = np.abs(np.sum(U.conj() * f.U, axis=0))
    assert np.abs(d - 1).max() <= 1e-8


def test_grurv_singular_factor():
    A = np.diag([1.0, 1.0, 0.0])
    with pytest.raises(randurv.IllConditionedProductError):
        randurv.grurv([(np.eye(3), 1), (A, -1)], 0)


def test_product_spec_validation():
    with pytest.raises(ValueError):
        randurv.ProductSpec([])
    with pytest.raises(dense.DimensionError):
        randurv.ProductSpec([(np.eye(2), 1), (np.eye(3), 1)])
    with pytest.raises(ValueError):
        randurv.ProductSpec([(np.eye(2), 2)])


@given(st.integers(0, 2 ** 31))
def test_grurv_subspace_property(seed):
    rng = np.random.default_rng(seed)
    n, r = 10, 4
    A1 = gapped(n, n, 1.0, rng)
    A2 = gapped(n, r, 1e-3, rng)
    spec = randurv.ProductSpec([(A1, -1), (A2, 1)])
    U, _, _ = randurv.grurv(spec, seed)
    f = randurv.rurv(spec.explicit(), seed)
    assert subspace_sine(U[:, :r], f.U[:, :r]) <= 1e-8
