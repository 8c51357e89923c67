"""Randomized rank-revealing URV/ULV and the product version GRURV.

``rurv`` multiplies by the conjugate transpose of a Haar matrix and takes a
QR factorization, ``rulv`` does the same with QL.  ``grurv`` propagates a
unitary factor through a product of matrices and inverses using only QR and
RQ factorizations, so neither the product nor any inverse is formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dense
from .dense import EPS, explicit_q, factorize, haar_orthogonal, matmul, norms
from .ledger import ensure_ledger

HAAR_STREAM = 0


class IllConditionedProductError(ArithmeticError):
    pass


@dataclass
class RankRevealFactors:
    U: np.ndarray
    R: np.ndarray
    V: np.ndarray
    rank_gap_report: tuple | None = None

    def reassemble(self):
        return self.U @ self.R @ self.V


@dataclass
class ProductSpec:
    factors: list

    def __post_init__(self):
        if not self.factors:
            raise ValueError("product needs at least one factor")
        n = None
        for A, m in self.factors:
            A = np.asarray(A)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise dense.DimensionError("product factors must be square")
            if n is not None and A.shape[0] != n:
                raise dense.DimensionError("product factors must share a dimension")
            n = A.shape[0]
            if m not in (1, -1):
                raise ValueError("exponents must be +1 or -1")

    @property
    def k(self):
        return len(self.factors)

    def explicit(self):
        """Form the product with explicit inverses (test oracle only)."""
        n = np.asarray(self.factors[0][0]).shape[0]
        M = np.eye(n, dtype=np.result_type(*[A for A, _ in self.factors]))
        for A, m in self.factors:
            M = M @ (A if m == 1 else np.linalg.inv(A))
        return M


def haar_for(n, kind, rng_seed, ledger=None):
    """The Haar matrix used by every randomized factorization for this seed."""
    return haar_orthogonal(n, kind, dense.child_rng(rng_seed, HAAR_STREAM), ledger)


def gap_report(T):
    """Advisory (r, sigma_min(T11), sigma_max(T22)) at the largest diagonal gap."""
    d = np.abs(np.diagonal(T))
    n = d.size
    if n < 2 or d.max() == 0:
        return None
    ratios = d[:-1] / np.maximum(d[1:], d.max() * EPS)
    r = int(np.argmax(ratios)) + 1
    s11 = dense.jacobi_svd(T[:r, :r])[0]
    s22 = dense.jacobi_svd(T[r:, r:])[0]
    return r, float(s11[-1]), float(s22[0])


def rurv(A, rng_seed=None, ledger=None, report=False):
    """A = U R V with V Haar and R upper triangular."""
    A = dense.as_dense(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise dense.DimensionError("square matrix required")
    led = ensure_ledger(ledger)
    V = haar_for(n, dense.scalar_kind(A), rng_seed, led)
    Ahat = matmul(A, V.conj().T, led)
    F = factorize(Ahat, "QR", led)
    U = explicit_q(F, led)
    R = F.triangular
    return RankRevealFactors(U, R, V, gap_report(R) if report else None)


def rulv(A, rng_seed=None, ledger=None):
    """A = U L V with V Haar and L lower triangular."""
    A = dense.as_dense(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise dense.DimensionError("square matrix required")
    led = ensure_ledger(ledger)
    V = haar_for(n, dense.scalar_kind(A), rng_seed, led)
    Ahat = matmul(A, V.conj().T, led)
    F = factorize(Ahat, "QL", led)
    return RankRevealFactors(explicit_q(F, led), F.triangular, V)


def _check_invertible(R, i):
    n = R.shape[0]
    tol = n * EPS * norms(R, "one")
    d = np.abs(np.diagonal(R))
    if d.size and d.min() <= tol:
        raise IllConditionedProductError(
            f"factor {i} is numerically singular (min |R_jj| = {d.min():.3e})")


def grurv(spec, rng_seed=None, ledger=None):
    """Unitary factor of a randomized URV of A_1^{m_1} ... A_k^{m_k}.

    Returns ``(U_current, V, R_list)`` with
    ``M_k = U_current R_1^{m_1} ... R_k^{m_k} V``.
    """
    if not isinstance(spec, ProductSpec):
        spec = ProductSpec(list(spec))
    led = ensure_ledger(ledger)
    mats = [np.asarray(A) for A, _ in spec.factors]
    exps = [m for _, m in spec.factors]
    if any(np.iscomplexobj(A) for A in mats):
        mats = [np.asarray(A, dtype=np.complex128) for A in mats]
    else:
        mats = [np.asarray(A, dtype=np.float64) for A in mats]
    k = spec.k
    Rs = [None] * k
    if exps[-1] == 1:
        f = rurv(mats[-1], rng_seed, led)
        U, Rs[-1], V = f.U, f.R, f.V
    else:
        f = rulv(mats[-1].conj().T, rng_seed, led)
        U, V = f.U, f.V
        Rs[-1] = f.R.conj().T
        _check_invertible(Rs[-1], k)
    Ucur = U
    for i in range(k - 2, -1, -1):
        if exps[i] == 1:
            F = factorize(matmul(mats[i], Ucur, led), "QR", led)
            Ucur = explicit_q(F, led)
            Rs[i] = F.triangular
        else:
            F = factorize(matmul(Ucur.conj().T, mats[i], led), "RQ", led)
            Rs[i] = F.triangular
            _check_invertible(Rs[i], i + 1)
            Ucur = explicit_q(F, led).conj().T
    return Ucur, V, Rs


def reassemble_r(R_list, exps):
    """R_1^{m_1} ... R_k^{m_k} (test helper; inverses via triangular solves)."""
    n = R_list[0].shape[0]
    R = np.eye(n, dtype=np.result_type(*R_list))
    for Ri, m in zip(R_list, exps):
        if m == 1:
            R = R @ Ri
        else:
            R = dense.trsm(Ri, R, right=True)
    return R
