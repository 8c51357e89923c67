"""Implicit repeated squaring and single divide-and-conquer steps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import dense
from ..dense import EPS, factorize, matmul, norms
from ..ledger import ensure_ledger
from ..randurv import IllConditionedProductError, grurv


@dataclass
class StrategyConfig:
    """Knobs shared by the splitting steps and the recursive drivers.

    Parameters
    ----------
    tau : float
        Relative change of the stacked-QR triangular factor at which the
        squaring iteration is declared converged.
    maxit : int or None
        Iteration cap; ``None`` derives one from :func:`iteration_budget`
        for the problem at hand (never more than ``maxit_cap``).
    split_accept_tol : float
        Largest relative off-diagonal mass that may be discarded.
    base_case_size : int
        Blocks this small are finished by a direct Schur iteration.
    max_failed_splits : int
        Consecutive failures tolerated in one region before it is reported
        as an enclosure.
    eps_target : float
        Relative accuracy asked of the computed projector.
    cluster_tol : float
        Symmetric driver: intervals narrower than this (relative to the
        matrix norm) are emitted without further splitting.
    """

    tau: float = 1e-12
    maxit: int | None = None
    split_accept_tol: float = 1e-8
    base_case_size: int = 4
    max_failed_splits: int = 3
    rng_seed: int | None = None
    eps_target: float = EPS
    cluster_tol: float = 1e-10
    maxit_cap: int = 60

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if self.base_case_size < 1:
            raise ValueError("base_case_size must be at least 1")
        if self.max_failed_splits < 1:
            raise ValueError("max_failed_splits must be at least 1")
        if self.maxit is not None and self.maxit < 1:
            raise ValueError("maxit must be positive")
        if not 0 < self.eps_target < 1:
            raise ValueError("eps_target must lie in (0, 1)")

    def resolve_maxit(self, n, norm_est):
        if self.maxit is not None:
            return int(self.maxit)
        if norm_est <= 0:
            return 1
        d = 64 * max(n, 1) * EPS * norm_est
        return min(self.maxit_cap, iteration_budget(d, norm_est, 1.0, self.eps_target))

    def with_seed(self, seed):
        return replace(self, rng_seed=seed)


def iteration_budget_raw(d_est, norm_est, kappa_est, eps):
    """Unrounded squaring count needed for relative projector error ``eps``.

    ``d_est`` is the distance from the splitting line to the nearest
    eigenvalue (or to the pseudospectrum), ``norm_est`` bounds the size of
    the mapped pencil and ``kappa_est`` the eigenvector conditioning.  The
    first term is clamped at zero once the distance is comparable to the
    norm.
    """
    if d_est <= 0:
        raise ValueError("distance estimate must be positive")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if norm_est <= 0 or kappa_est <= 0:
        raise ValueError("norm and condition estimates must be positive")
    ratio = norm_est * kappa_est / d_est
    first = math.log2(ratio - 1) if ratio > 2 else 0.0
    return first + math.log2(math.log2(1 / eps))


def iteration_budget(d_est, norm_est, kappa_est, eps):
    return int(math.ceil(iteration_budget_raw(d_est, norm_est, kappa_est, eps) - 1e-12))


@dataclass
class IRSResult:
    A_p: np.ndarray
    B_p: np.ndarray
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)


def _positive_diagonal(R):
    """Scale rows so the diagonal is real and nonnegative (R is unique only up to this)."""
    d = R.diagonal()
    ph = np.ones_like(d)
    nz = d != 0
    ph[nz] = np.abs(d[nz]) / d[nz]
    return R * ph[:, np.newaxis]


def irs(A, B, cfg=None, ledger=None, callback=None):
    """Square the eigenvalues of ``A^{-1} B`` implicitly via stacked QR.

    Each sweep factors ``[B_j; -A_j] = Q R_j`` (complete ``Q``) and forms
    ``A_{j+1} = Q12^H A_j``, ``B_{j+1} = Q22^H B_j``.  Afterwards
    ``(A_p + B_p)^{-1} A_p`` approximates the projector onto the right
    deflating subspace for eigenvalues of ``A x = lambda B x`` outside the
    unit circle.  ``callback(j, A_j, B_j)`` runs after every sweep.
    """
    cfg = cfg or StrategyConfig()
    led = ensure_ledger(ledger)
    A, B = dense.promote(dense.as_dense(A), dense.as_dense(B))
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise dense.DimensionError("A and B must be square and of equal size")
    maxit = cfg.resolve_maxit(n, max(norms(A, "one"), norms(B, "one")))
    Aj, Bj = A.copy(), B.copy()
    E = np.zeros((2 * n, n), dtype=A.dtype)
    E[n:, :] = np.eye(n)
    history = []
    R_prev = None
    converged = False
    j = 0
    with led.in_phase("irs"):
        while j < maxit:
            F = factorize(np.vstack([Bj, -Aj]), "QR", led)
            Rj = _positive_diagonal(F.triangular)
            Qr = F.apply_q(E)
            Q12, Q22 = Qr[:n], Qr[n:]
            Aj = matmul(Q12.conj().T, Aj, led)
            Bj = matmul(Q22.conj().T, Bj, led)
            j += 1
            if callback is not None:
                callback(j, Aj, Bj)
            if R_prev is not None:
                base = norms(R_prev, "one")
                rel = norms(Rj - R_prev, "one") / base if base > 0 else 0.0
                history.append(rel)
                if rel <= cfg.tau:
                    converged = True
                    break
            R_prev = Rj
    return IRSResult(Aj, Bj, j, converged, history)


def projector_trace(A_p, B_p, ledger=None):
    """Trace of ``(A_p + B_p)^{-1} A_p``, i.e. the rank of the projector."""
    S = A_p + B_p
    F = factorize(S, "QR", ledger)
    X = dense.trsm(F.triangular, F.apply_qh(A_p), ledger)
    return complex(np.trace(X))


def split_select(A_hat, B_hat=None):
    """Best block-triangular split of a (pair of) transformed matrices.

    Returns ``(k, metric)`` minimizing ``||E21||_1 / ||A||_1`` (plus the same
    ratio for ``B_hat``) over ``k = 1..n-1``, where ``E21`` is the trailing
    ``(n-k) x k`` block.  Ties go to the smallest ``k``.
    """
    A_hat = np.asarray(A_hat)
    n = A_hat.shape[0]
    if A_hat.ndim != 2 or A_hat.shape[1] != n:
        raise dense.DimensionError("square matrix required")
    if n < 2:
        raise dense.DimensionError("need n >= 2 to split")

    def metric(X):
        absX = np.abs(X)
        # tails[k, j] = sum_{i >= k} |X_ij|
        tails = np.cumsum(absX[::-1], axis=0)[::-1]
        run_max = np.maximum.accumulate(tails, axis=1)
        e21 = run_max[np.arange(1, n), np.arange(0, n - 1)]
        total = absX.sum(axis=0).max()
        return e21 / total if total > 0 else np.zeros(n - 1)

    m = metric(A_hat)
    if B_hat is not None:
        B_hat = np.asarray(B_hat)
        if B_hat.shape != A_hat.shape:
            raise dense.DimensionError("A_hat and B_hat must match")
        m = m + metric(B_hat)
    i = int(np.argmin(m))
    return i + 1, float(m[i])


@dataclass
class SplitOutcome:
    A_hat: np.ndarray | None
    B_hat: np.ndarray | None
    Q_L: np.ndarray | None
    Q_R: np.ndarray | None
    k: int
    offdiag_metric: float
    success: bool
    converged: bool
    iterations: int
    count: int | None = None
    reason: str = ""

    @property
    def split_index(self):
        return self.k


def _count(A_p, B_p, led):
    n = A_p.shape[0]
    try:
        tr = projector_trace(A_p, B_p, led)
    except (dense.SingularTriangularError, ZeroDivisionError, FloatingPointError):
        return None
    if not np.isfinite(tr):
        return None
    c = round(tr.real)
    if abs(tr - c) > 0.25 or c < 0 or c > n:
        return None
    return int(c)


def _failed(n, res, reason, count=None):
    return SplitOutcome(None, None, None, None, 1, math.inf,
                        False, res.converged if res is not None else False,
                        res.iterations if res is not None else 0, count, reason)


def _right_factor(res, seed, led):
    S = res.A_p + res.B_p
    Q, _, _ = grurv([(S, -1), (res.A_p, 1)], seed, led)
    return Q


def rnep_step(A, cfg=None, ledger=None, pencil=None, rng_seed=None):
    """One divide step for a single matrix.

    ``pencil`` is the pencil whose squaring separates the spectrum (defaults
    to ``(A, I)``, i.e. the unit circle).  The returned ``A_hat = Q^H A Q``
    is block upper triangular up to ``offdiag_metric`` when ``success``.
    """
    cfg = cfg or StrategyConfig()
    led = ensure_ledger(ledger)
    A = dense.as_dense(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise dense.DimensionError("square matrix required")
    if pencil is None:
        pencil = (A, np.eye(n))
    seed = cfg.rng_seed if rng_seed is None else rng_seed
    res = irs(pencil[0], pencil[1], cfg, led)
    if not res.converged:
        return _failed(n, res, "squaring did not converge")
    count = _count(res.A_p, res.B_p, led)
    if n < 2:
        return _failed(n, res, "nothing to split", count)
    try:
        Q = _right_factor(res, seed, led)
    except IllConditionedProductError as exc:
        return _failed(n, res, str(exc), count)
    A, Q = dense.promote(A, Q)
    A_hat = matmul(Q.conj().T, matmul(A, Q, led), led)
    k, metric = split_select(A_hat)
    ok = metric <= cfg.split_accept_tol
    return SplitOutcome(A_hat, None, Q, Q, k, metric, ok, True, res.iterations, count,
                        "" if ok else "off-diagonal block too large")


def rsep_step(A, cfg=None, ledger=None, pencil=None, rng_seed=None):
    """As :func:`rnep_step` for a Hermitian matrix; ``A_hat`` is re-symmetrized."""
    A = dense.as_dense(A)
    scale = max(norms(A, "fro"), 1e-300)
    if norms(A - A.conj().T, "fro") > 1e-10 * scale:
        raise dense.NotSymmetricError("matrix is not symmetric")
    out = rnep_step(A, cfg, ledger, pencil, rng_seed)
    if out.A_hat is not None:
        H = (out.A_hat + out.A_hat.conj().T) / 2
        out.A_hat = H
        out.k, out.offdiag_metric = split_select(H)
        out.success = out.converged and out.offdiag_metric <= (cfg or StrategyConfig()).split_accept_tol
    return out


def rgnep_step(A, B, cfg=None, ledger=None, rng_seed=None):
    """One divide step for the pencil ``A - lambda B`` across the unit circle."""
    cfg = cfg or StrategyConfig()
    led = ensure_ledger(ledger)
    A, B = dense.promote(dense.as_dense(A), dense.as_dense(B))
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise dense.DimensionError("A and B must be square and of equal size")
    seed = cfg.rng_seed if rng_seed is None else rng_seed
    right = irs(A, B, cfg, led)
    if not right.converged:
        return _failed(n, right, "squaring did not converge")
    count = _count(right.A_p, right.B_p, led)
    left = irs(A.conj().T, B.conj().T, cfg, led)
    if not left.converged:
        return _failed(n, left, "squaring did not converge", count)
    if n < 2:
        return _failed(n, right, "nothing to split", count)
    try:
        Q_R = _right_factor(right, seed, led)
        S = left.A_p + left.B_p
        Q_L, _, _ = grurv([(left.A_p.conj().T, 1), (S.conj().T, -1)], seed, led)
    except IllConditionedProductError as exc:
        return _failed(n, right, str(exc), count)
    A, B, Q_L, Q_R = dense.promote(A, B, Q_L, Q_R)
    A_hat = matmul(Q_L.conj().T, matmul(A, Q_R, led), led)
    B_hat = matmul(Q_L.conj().T, matmul(B, Q_R, led), led)
    k, metric = split_select(A_hat, B_hat)
    ok = metric <= cfg.split_accept_tol
    return SplitOutcome(A_hat, B_hat, Q_L, Q_R, k, metric, ok, True,
                        right.iterations + left.iterations, count,
                        "" if ok else "off-diagonal block too large")


def line_pencil(A, theta=0.0, offset=0.0, center=0.0, radius=1.0):
    """Pencil whose unit-circle split is the line ``Re(w) = offset``.

    Here ``w = exp(-i theta) (z - center) / radius``; the squaring projector
    of the returned pencil selects the eigenvalues with ``Re(w) > offset``.
    """
    A = np.asarray(A)
    n = A.shape[0]
    rot = complex(np.exp(-1j * theta)) if theta else 1.0
    W = rot * (A - center * np.eye(n)) / radius
    if np.iscomplexobj(W) and not np.iscomplexobj(A) and np.all(W.imag == 0):
        W = W.real
    I = np.eye(n)
    return W - (offset - 1) * I, W - (offset + 1) * I


def backward_error_history(A, pencil, cfg=None, ledger=None, rng_seed=None, maxit=None):
    """Divide-step backward error ``||E21||_2 / ||A||_2`` after each squaring.

    The invariant subspace is recomputed from the current iterate at every
    step; ``E21`` is the trailing block at the split chosen by
    :func:`split_select`.  Returns a list of ``(iteration, error, k)``.
    """
    cfg = cfg or StrategyConfig()
    if maxit is not None:
        cfg = replace(cfg, maxit=maxit, tau=1e-300)
    A = dense.as_dense(A)
    normA = dense.jacobi_svd(A)[0][0] if A.size else 0.0
    seed = cfg.rng_seed if rng_seed is None else rng_seed
    rows = []

    def record(j, Aj, Bj):
        try:
            Q, _, _ = grurv([(Aj + Bj, -1), (Aj, 1)], seed)
        except IllConditionedProductError:
            rows.append((j, math.inf, 0))
            return
        X, Qc = dense.promote(A, Q)
        A_hat = Qc.conj().T @ X @ Qc
        k, _ = split_select(A_hat)
        e21 = A_hat[k:, :k]
        err = dense.jacobi_svd(e21)[0][0] / normA if normA > 0 else 0.0
        rows.append((j, float(err), k))

    irs(pencil[0], pencil[1], cfg, ledger, callback=record)
    return rows
