"""Cost accounting: the two-level memory ledger, closed-form sequential and
parallel cost models, and the reduction of QR to a Schur decomposition.

The closed forms keep unit constants; they fix exponents and the number
of sub-calls of each kernel, not absolute times.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import dense
from .ledger import CostLedger, ensure_ledger, null_ledger

__all__ = [
    "CostLedger", "null_ledger", "ledger_record", "CostTriple", "seq_cost_formulas",
    "seq_recurrence_constant", "seq_recurrence_total", "ParallelCostParams",
    "ParallelCost", "par_cost_formulas", "rgnep_total_constant", "rgnep_total_unrolled",
    "s2qr", "RankDeficientError", "CSV_COLUMNS", "cost_rows", "write_cost_csv",
]

SEQ_KINDS = ("MM", "QR", "RURV", "IRS", "RGNEP_step")
PAR_KINDS = ("SUMMA", "CAQR", "RURV", "IRS", "RGNEP_step", "RGNEP_total", "PTREVC")
CSV_COLUMNS = ("phase", "flops", "words", "messages", "M", "n", "P")


def ledger_record(handle, phase, words=0, messages=0, flops=0):
    """Add counts to ``handle`` under ``phase`` (thread safe)."""
    handle.record(phase, words=words, messages=messages, flops=flops)


# ----------------------------------------------------------------------------
# sequential model

class CostTriple(NamedTuple):
    flops: float
    words: float
    messages: float

    def scaled(self, k):
        return CostTriple(k * self.flops, k * self.words, k * self.messages)

    def __add__(self, other):
        return CostTriple(self.flops + other.flops, self.words + other.words,
                          self.messages + other.messages)

    def time(self, alpha=1.0, beta=1.0, gamma=1.0):
        return alpha * self.messages + beta * self.words + gamma * self.flops


def _unit(volume, M):
    """Cost of a cubic kernel doing ``volume`` multiply-adds with fast memory ``M``."""
    return CostTriple(volume, volume / math.sqrt(M), volume / M ** 1.5)


def seq_cost_formulas(kind, n, M, p=1, m=None):
    """Leading-term (flops, words, messages) on a two-level machine.

    ``p`` is the number of repeated-squaring iterations for ``IRS`` and
    ``RGNEP_step``; ``m`` the row count for ``QR`` (default ``n``).
    """
    if n < 1 or M < 1:
        raise ValueError("n and M must be positive")
    mm = _unit(float(n) ** 3, M)
    if kind == "MM":
        return mm
    if kind == "QR":
        rows = n if m is None else m
        return _unit(float(rows) * n * n, M)
    qr = _unit(float(n) ** 3, M)
    qr_tall = _unit(2.0 * n ** 3, M)
    rurv = qr.scaled(2) + mm
    irs = (qr_tall + mm.scaled(2)).scaled(p)
    if kind == "RURV":
        return rurv
    if kind == "IRS":
        return irs
    if kind == "RGNEP_step":
        return irs.scaled(2) + rurv.scaled(2) + qr.scaled(2) + mm.scaled(6)
    raise ValueError(f"unknown kind {kind!r}; expected one of {SEQ_KINDS}")


def seq_recurrence_constant(f0):
    """Bound on total/step constant when every split lands in ``[1-f0, f0]``."""
    _check_f0(f0)
    return 1.0 / (3.0 * f0 * (1.0 - f0))


def seq_recurrence_total(n, f0, step=1.0, base=1.0):
    """Unroll ``C(n) = C(f0 n) + C((1-f0) n) + step*n^3`` down to ``n <= base``."""
    _check_f0(f0)
    if n <= base:
        return step * n ** 3
    return (seq_recurrence_total(f0 * n, f0, step, base)
            + seq_recurrence_total((1 - f0) * n, f0, step, base) + step * n ** 3)


def _check_f0(f0):
    if not 0.5 <= f0 < 1.0:
        raise ValueError("f0 must lie in [1/2, 1)")


# ----------------------------------------------------------------------------
# parallel model

@dataclass(frozen=True)
class ParallelCostParams:
    P: int
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    b: float | None = None
    f0: float = 0.5

    def __post_init__(self):
        if self.P < 1:
            raise ValueError("P must be at least 1")
        _check_f0(self.f0)
        if self.b is not None and self.b <= 0:
            raise ValueError("blocksize must be positive")

    @property
    def sqrtP(self):
        return math.sqrt(self.P)

    def require_square(self):
        r = math.isqrt(self.P)
        if r * r != self.P:
            raise ValueError(f"P = {self.P} is not a perfect square")
        return r


@dataclass(frozen=True)
class ParallelCost:
    """Message, word and flop counts along the critical path, with their weighted sum."""

    messages: float
    words: float
    flops: float
    total: float
    constant_factor: float = 1.0


def _lg(P):
    return math.log2(P) if P > 1 else 0.0


def _pack(p, L, W, F, const=1.0):
    return ParallelCost(L, W, F, p.alpha * L + p.beta * W + p.gamma * F, const)


def rgnep_total_constant(P, f0):
    """Geometric factor accumulated over the recursion depth ``log_{f0}(P^{-1/2})``."""
    _check_f0(f0)
    return (1.0 - P ** -0.5) / (1.0 - f0)


def rgnep_total_unrolled(n, params, step=None):
    """Follow the larger child (``f0 n`` rows on ``f0^2 P`` processors) until one
    processor remains, summing the per-step critical-path words."""
    step = step or (lambda n_, P_: n_ ** 2 / math.sqrt(P_))
    total = 0.0
    nn, PP = float(n), float(params.P)
    while PP > 1.0 + 1e-9:
        total += step(nn, PP)
        nn *= params.f0
        PP *= params.f0 ** 2
    return total


def par_cost_formulas(kind, n, params):
    """Evaluate the parallel cost expressions with unit constants.

    Logarithms are base 2 and vanish at ``P = 1``; the blocksize defaults
    to ``n / sqrt(P)``.  Arithmetic terms carrying ``log P`` use
    ``max(1, log P)`` so a single processor still does ``n^3`` work.
    """
    p = params
    b = p.b if p.b is not None else n / p.sqrtP
    lg = _lg(p.P)
    lgf = max(1.0, lg)
    sq = p.sqrtP
    if kind == "SUMMA":
        return _pack(p, (n / b) * lg, n * n / sq * lg, n ** 3 / p.P)
    if kind == "CAQR":
        return _pack(p, (n / b) * lg, n * n / sq * lg, n ** 3 / p.P + n * n * b / sq * lg)
    if kind in ("RURV", "IRS", "RGNEP_step"):
        return _pack(p, sq * lg, n * n / sq * lg, n ** 3 / p.P * lgf)
    if kind == "RGNEP_total":
        c = rgnep_total_constant(p.P, p.f0)
        L = (n / b) * lg
        W = n * n / sq * lg
        F = n ** 3 / p.P + n * n * b / sq * lg
        # once a subproblem owns one processor it finishes sequentially
        leaf = seq_recurrence_constant(p.f0) * (n / sq) ** 3
        return _pack(p, c * L, c * W, c * F + leaf, c)
    if kind == "PTREVC":
        p.require_square()
        return _pack(p, sq * lg, n * n / sq * lg, n ** 3 / p.P)
    raise ValueError(f"unknown kind {kind!r}; expected one of {PAR_KINDS}")


# ----------------------------------------------------------------------------
# QR through a Schur decomposition

class RankDeficientError(ValueError):
    """The stacked matrix ``[R; X]`` does not have full column rank."""


def _swap_adjacent(T, Z, k):
    """Exchange diagonal entries ``k`` and ``k+1`` of upper triangular ``T``."""
    a, b, x = T[k, k], T[k + 1, k + 1], T[k, k + 1]
    z = np.array([x, b - a])
    nz = np.linalg.norm(z)
    if nz == 0:
        return
    z /= nz
    G = np.array([[z[0], -np.conj(z[1])], [z[1], np.conj(z[0])]])
    T[:, k:k + 2] = T[:, k:k + 2] @ G
    T[k:k + 2, :] = G.conj().T @ T[k:k + 2, :]
    Z[:, k:k + 2] = Z[:, k:k + 2] @ G
    T[k + 1, k] = 0


def reorder_schur(T, Z, target):
    """Reorder a complex Schur form so the leading diagonal follows ``target``."""
    T = np.array(T, dtype=complex)
    Z = np.array(Z, dtype=complex)
    for pos, want in enumerate(target):
        q = pos + int(np.argmin(np.abs(T.diagonal()[pos:] - want)))
        for k in range(q - 1, pos - 1, -1):
            _swap_adjacent(T, Z, k)
    return T, Z


def small_schur_oracle(B):
    T, Z = dense.small_schur(B)
    return Z, T


def tree_schur_oracle(B, cfg=None):
    """Schur form assembled from the nonsymmetric divide-and-conquer tree;
    diagonal blocks left as enclosures are finished with the small solver."""
    from .splitdc import nonsym_strategy

    tree = nonsym_strategy(B, cfg)
    Q = np.asarray(tree.accumulated_transform(), dtype=complex)
    T = Q.conj().T @ B @ Q
    pos = 0
    for leaf in tree.leaves():
        k = leaf.size
        if leaf.kind != "leaf_eigenvalues" or leaf.vectors is None:
            Tk, Zk = dense.small_schur(T[pos:pos + k, pos:pos + k])
            Q[:, pos:pos + k] = Q[:, pos:pos + k] @ Zk
            T = Q.conj().T @ B @ Q
        pos += k
    return Q, np.triu(T)


def s2qr(R, X, schur_oracle=None, ledger=None):
    """QR factorization of ``[R; X]`` recovered from a Schur form of
    ``[[R, 0], [X, 0]]``.

    The Schur form is reordered so its leading diagonal is ``diag(R)``;
    then ``Q11`` (top-left block of the Schur vectors) is upper triangular
    and ``Rhat = T11 Q11^{-1}``.  Columns are normalised so ``Rhat`` has a
    positive diagonal.  Returns ``(Qhat, Rhat)`` with ``Qhat`` of shape
    ``(m + n, m)``.
    """
    R = dense.as_dense(R)
    X = dense.as_dense(X)
    m = R.shape[0]
    if R.shape != (m, m) or X.ndim != 2 or X.shape[1] != m:
        raise dense.DimensionError("R must be m x m and X must have m columns")
    if np.any(np.tril(R, -1) != 0):
        raise ValueError("R must be upper triangular")
    led = ensure_ledger(ledger)
    n = X.shape[0]
    A = np.vstack([R, X])
    s = dense.jacobi_svd(A)[0]
    if s.min() <= m * dense.EPS * max(s.max(), 1e-300) or np.any(R.diagonal() == 0):
        raise RankDeficientError("[R; X] is rank deficient")
    oracle = schur_oracle or small_schur_oracle
    B = np.zeros((m + n, m + n), dtype=np.result_type(R, X))
    B[:m, :m] = R
    B[m:, :m] = X
    with led.in_phase("s2qr"):
        Z, T = oracle(B)
        T, Z = reorder_schur(T, Z, R.diagonal())
        Q11 = np.triu(Z[:m, :m])
        T11 = np.triu(T[:m, :m])
        Rhat = dense.trsm(Q11, T11, led, right=True)
        Qhat = Z[:, :m]
        ph = Rhat.diagonal() / np.abs(Rhat.diagonal())
        Rhat = np.triu(Rhat / ph[:, np.newaxis])
        Qhat = Qhat * ph[np.newaxis, :]
    if not np.iscomplexobj(A):
        Qhat, Rhat = Qhat.real.copy(), Rhat.real.copy()
    return Qhat, Rhat


# ----------------------------------------------------------------------------
# CSV report

def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".16e")
    return "" if v is None else str(v)


def cost_rows(ledger, n=None, P=1):
    """One row per ledger phase in :data:`CSV_COLUMNS` order."""
    return [(name, fl, w, msg, ledger.M, n, P) for name, fl, w, msg in ledger.phase_rows()]


def write_cost_csv(rows, out=None):
    """Write rows under the standard header; returns the text when ``out`` is None."""
    buf = io.StringIO() if out is None else None
    fh = buf if out is None else (open(out, "w", newline="") if isinstance(out, str) else out)
    try:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            if len(r) != len(CSV_COLUMNS):
                raise ValueError(f"row has {len(r)} fields, expected {len(CSV_COLUMNS)}")
            w.writerow([_fmt(v) for v in r])
    finally:
        if isinstance(out, str):
            fh.close()
    return buf.getvalue() if buf is not None else None
