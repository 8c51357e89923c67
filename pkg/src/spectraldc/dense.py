"""Dense kernels: blocked products and solves, Householder factorizations in
all four corners, Haar sampling, Jacobi reference solvers and small helpers.

Matrices are plain 2-D numpy arrays of dtype float64 or complex128.  Every
blocked kernel takes a :class:`~spectraldc.ledger.CostLedger` (or ``None``)
and reports the blocks it touches; the blocksize comes from the ledger's
fast-memory size so enabling or disabling the counters never changes the
arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ledger import ensure_ledger

EPS = np.finfo(np.float64).eps
ORACLE_SIZE_CAP = 512


class DimensionError(ValueError):
    pass


class ScalarKindError(TypeError):
    pass


class SingularTriangularError(ArithmeticError):
    pass


class NotSymmetricError(ValueError):
    pass


# ----------------------------------------------------------------------------
# basic helpers

def as_dense(A, kind=None):
    """Validate and convert to a 2-D float64/complex128 array."""
    A = np.asarray(A)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise DimensionError("expected a 2-D matrix")
    if kind is None:
        kind = "complex128" if np.iscomplexobj(A) else "real64"
    dtype = np.complex128 if kind == "complex128" else np.float64
    if dtype is np.float64 and np.iscomplexobj(A):
        raise ScalarKindError("complex data cannot be stored as real64")
    return np.array(A, dtype=dtype, copy=True)


def scalar_kind(A):
    return "complex128" if np.iscomplexobj(A) else "real64"


def promote(*mats):
    """Cast all operands to a common scalar kind."""
    if any(np.iscomplexobj(M) for M in mats):
        return tuple(np.asarray(M, dtype=np.complex128) for M in mats)
    return tuple(np.asarray(M, dtype=np.float64) for M in mats)


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_rng(seed, counter):
    """Deterministic child stream ``counter`` of a root seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(int(counter),))
    return np.random.default_rng(ss)


def norms(A, which="fro"):
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    if which == "one":
        return float(np.abs(A).sum(axis=0).max())
    if which == "inf":
        return float(np.abs(A).sum(axis=1).max())
    if which == "fro":
        return float(np.sqrt((np.abs(A) ** 2).sum()))
    raise ValueError(f"unknown norm {which!r}")


def gershgorin_radius(A):
    """Radius of an origin-centred disk holding every Gershgorin disk."""
    A = np.asarray(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionError("square matrix required")
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


def gershgorin_interval(A):
    """Real interval holding the spectrum of a symmetric matrix."""
    A = np.asarray(A)
    d = A.diagonal().real
    r = np.abs(A).sum(axis=1) - np.abs(A.diagonal())
    return float((d - r).min()), float((d + r).max())


# ----------------------------------------------------------------------------
# blocked matrix multiply and triangular solve

def _tiles(n, b):
    return [(s, min(s + b, n)) for s in range(0, n, b)]


def matmul(A, B, ledger=None):
    """C = A @ B computed tile by tile with b x b blocks, b = floor(sqrt(M/3))."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise DimensionError(f"cannot multiply {A.shape} by {B.shape}")
    if np.iscomplexobj(A) != np.iscomplexobj(B):
        raise ScalarKindError("operands have different scalar kinds")
    led = ensure_ledger(ledger)
    b = led.blocksize
    m, k = A.shape
    n = B.shape[1]
    C = np.zeros((m, n), dtype=np.result_type(A, B))
    ti, tj, tk = _tiles(m, b), _tiles(n, b), _tiles(k, b)
    tag, ta, tb = led.tag(C), led.tag(A), led.tag(B)
    for ii, (i0, i1) in enumerate(ti):
        for jj, (j0, j1) in enumerate(tj):
            led.touch(("C", tag, ii, jj), i1 - i0, j1 - j0)
            acc = C[i0:i1, j0:j1]
            for kk, (k0, k1) in enumerate(tk):
                led.touch(("A", ta, ii, kk), i1 - i0, k1 - k0)
                led.touch(("B", tb, kk, jj), k1 - k0, j1 - j0)
                acc += A[i0:i1, k0:k1] @ B[k0:k1, j0:j1]
            led.add_flops(2 * (i1 - i0) * (j1 - j0) * k)
    return C


def _check_triangular_diag(T):
    n = T.shape[0]
    tol = n * EPS * norms(T, "one")
    d = np.abs(T.diagonal())
    bad = np.flatnonzero(d <= tol)
    if bad.size:
        raise SingularTriangularError(
            f"triangular factor is numerically singular at index {int(bad[0])}")


def trsm(T, B, ledger=None, lower=False, right=False):
    """Solve T X = B (or X T = B when ``right``) for triangular T, blocked."""
    T = np.asarray(T)
    B = np.asarray(B)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise DimensionError("triangular factor must be square")
    if right:
        X = trsm(T.conj().T, B.conj().T, ledger, lower=not lower)
        return X.conj().T
    squeeze = B.ndim == 1
    if squeeze:
        B = B.reshape(-1, 1)
    if B.shape[0] != T.shape[0]:
        raise DimensionError("right-hand side has the wrong number of rows")
    _check_triangular_diag(T)
    T, B = promote(T, B)
    led = ensure_ledger(ledger)
    n, r = B.shape
    bs = led.blocksize
    X = B.copy()
    tiles = _tiles(n, bs)
    order = range(len(tiles)) if lower else range(len(tiles) - 1, -1, -1)
    done = []
    tT, tX = led.tag(T), led.tag(X)
    for I in order:
        i0, i1 = tiles[I]
        for J in done:
            j0, j1 = tiles[J]
            led.touch(("T", tT, I, J), i1 - i0, j1 - j0)
            led.touch(("X", tX, J), j1 - j0, r)
            X[i0:i1] -= T[i0:i1, j0:j1] @ X[j0:j1]
            led.add_flops(2 * (i1 - i0) * (j1 - j0) * r)
        led.touch(("T", tT, I, I), i1 - i0, i1 - i0)
        D = T[i0:i1, i0:i1]
        Xi = X[i0:i1]
        rng = range(i1 - i0) if lower else range(i1 - i0 - 1, -1, -1)
        for t in rng:
            if lower:
                Xi[t] -= D[t, :t] @ Xi[:t]
            else:
                Xi[t] -= D[t, t + 1:] @ Xi[t + 1:]
            Xi[t] /= D[t, t]
        led.add_flops((i1 - i0) ** 2 * r)
        done.append(I)
    return X[:, 0] if squeeze else X


# ----------------------------------------------------------------------------
# Householder machinery

def house(x):
    """Reflector H = I - tau v v^H with H^H x = beta e1 and v[0] = 1."""
    x = np.asarray(x)
    alpha = x[0]
    v = np.zeros_like(x)
    v[0] = 1
    s = float(np.abs(x).max()) if x.size else 0.0
    if 0.0 < s < 1e-150 or 1e150 < s < math.inf:
        # v and tau are scale invariant; rescale by an exact power of two,
        # in two halves so neither factor (nor 1/s for subnormal s) overflows
        e = math.frexp(s)[1]
        h1, h2 = 2.0 ** (-(e // 2)), 2.0 ** (-(e - e // 2))
        v, tau, beta = house(x * h1 * h2)
        return v, tau, beta / h1 / h2
    xnorm = float(np.linalg.norm(x[1:])) if x.size > 1 else 0.0
    if xnorm == 0.0 and np.imag(alpha) == 0:
        return v, x.dtype.type(0), alpha
    beta = -math.copysign(math.hypot(abs(alpha), xnorm), np.real(alpha))
    tau = (beta - alpha) / beta
    v[1:] = x[1:] / (alpha - beta)
    return v, tau, beta


def _geqr2(P, led=None):
    """Unblocked QR of P in place; returns (V, taus)."""
    h, w = P.shape
    k = min(h, w)
    V = np.zeros((h, k), dtype=P.dtype)
    taus = np.zeros(k, dtype=P.dtype)
    flops = 0
    for i in range(k):
        v, tau, beta = house(P[i:, i])
        V[i:, i] = v
        taus[i] = tau
        P[i, i] = beta
        P[i + 1:, i] = 0
        if i + 1 < w and tau != 0:
            C = P[i:, i + 1:]
            C -= np.outer(np.conj(tau) * v, v.conj() @ C)
        hh = h - i
        flops += 4 * hh * (w - i - 1) + hh
    if led is not None:
        led.add_flops(flops)
    return V, taus


def larft(V, taus):
    """Upper triangular T with H_1 ... H_k = I - V T V^H."""
    k = taus.size
    T = np.zeros((k, k), dtype=V.dtype)
    for i in range(k):
        T[i, i] = taus[i]
        if i:
            T[:i, i] = -taus[i] * (T[:i, :i] @ (V[:, :i].conj().T @ V[:, i]))
    return T


@dataclass
class ReflectorBlock:
    """Householder vectors acting on a subset of rows, in compact WY form."""

    rows: np.ndarray
    V: np.ndarray
    taus: np.ndarray
    T: np.ndarray = None

    def __post_init__(self):
        if self.T is None:
            self.T = larft(self.V, self.taus)

    def apply_h(self, C):
        """C[rows] <- B^H C[rows] in place."""
        sub = C[self.rows]
        sub -= self.V @ (self.T.conj().T @ (self.V.conj().T @ sub))
        C[self.rows] = sub

    def apply(self, C):
        sub = C[self.rows]
        sub -= self.V @ (self.T @ (self.V.conj().T @ sub))
        C[self.rows] = sub

    def apply_right(self, C):
        """C[:, rows] <- C[:, rows] B."""
        sub = C[:, self.rows]
        sub -= ((sub @ self.V) @ self.T) @ self.V.conj().T
        C[:, self.rows] = sub

    def flop_count(self, ncols):
        h = self.V.shape[0]
        return sum(4 * (h - i) * ncols + (h - i) for i in range(self.taus.size))


@dataclass
class QRFactors:
    """Compact Householder factorization in one of four corners.

    ``blocks`` holds the reflectors of an underlying QR factorization of a
    (possibly flipped and/or conjugate-transposed) copy of the input; ``flip``
    and ``conj`` record how that copy was formed.
    """

    mode: str
    shape: tuple
    blocks: list
    triangular: np.ndarray
    core_shape: tuple
    flip: bool = False
    conj: bool = False
    dtype: object = np.float64
    meta: dict = field(default_factory=dict)

    @property
    def reflectors(self):
        out = []
        for blk in self.blocks:
            for i in range(blk.taus.size):
                out.append((blk.rows, blk.V[:, i], blk.taus[i]))
        return out

    def apply_q(self, C):
        C = np.array(C, dtype=np.result_type(C, self.dtype), copy=True)
        for blk in reversed(self.blocks):
            blk.apply(C)
        return C

    def apply_qh(self, C):
        C = np.array(C, dtype=np.result_type(C, self.dtype), copy=True)
        for blk in self.blocks:
            blk.apply_h(C)
        return C


def _panel_factor(P, row0, led, leaf_rows):
    """Factor a panel with a binary reduction tree; P is overwritten by R."""
    h, w = P.shape
    blocks = []
    if h <= leaf_rows + leaf_rows // 2 or h < 2 * w:
        led.touch(("panel", row0, 0), h, w)
        V, taus = _geqr2(P, led)
        blocks.append(ReflectorBlock(np.arange(row0, row0 + h), V, taus))
        return blocks
    starts = list(range(0, h, leaf_rows))
    if h - starts[-1] < w:
        starts.pop()
    bounds = [(s, starts[i + 1] if i + 1 < len(starts) else h) for i, s in enumerate(starts)]
    nodes = []
    for li, (s, e) in enumerate(bounds):
        led.touch(("panel", row0, li), e - s, w)
        blk = P[s:e]
        V, taus = _geqr2(blk, led)
        P[s:e] = blk
        blocks.append(ReflectorBlock(np.arange(row0 + s, row0 + e), V, taus))
        nodes.append(np.arange(s, s + w))
    while len(nodes) > 1:
        nxt = []
        for i in range(0, len(nodes) - 1, 2):
            rows = np.concatenate([nodes[i], nodes[i + 1]])
            S = P[rows]
            led.touch(("tree", row0, int(rows[0]), int(rows[-1])), rows.size, w)
            V, taus = _geqr2(S, led)
            P[rows] = S
            blocks.append(ReflectorBlock(rows + row0, V, taus))
            nxt.append(nodes[i])
        if len(nodes) % 2:
            nxt.append(nodes[-1])
        nodes = nxt
    return blocks


def _qr_core(A, led):
    """Blocked Householder QR of a tall matrix; returns (blocks, R)."""
    m, n = A.shape
    nb = led.blocksize
    leaf_rows = max(2 * nb, 8)
    blocks = []
    for j in range(0, n, nb):
        w = min(nb, n - j)
        P = A[j:, j:j + w]
        pblocks = _panel_factor(P, j, led, leaf_rows)
        A[j:, j:j + w] = P
        trail = A[:, j + w:]
        if trail.shape[1]:
            for bi, blk in enumerate(pblocks):
                for ti, (c0, c1) in enumerate(_tiles(trail.shape[1], nb)):
                    led.touch(("trail", j, bi, ti), blk.rows.size, c1 - c0)
                blk.apply_h(trail)
                led.add_flops(blk.flop_count(trail.shape[1]))
            A[:, j + w:] = trail
        blocks.extend(pblocks)
    R = np.triu(A[:n, :n])
    return blocks, R


_MODES = ("QR", "RQ", "QL", "LQ")


def factorize(A, mode="QR", ledger=None):
    """Householder factorization ``A = QR``, ``RQ``, ``QL`` or ``LQ``."""
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}")
    A = np.asarray(A)
    if A.ndim != 2 or A.size == 0:
        raise DimensionError("empty matrix")
    m, n = A.shape
    if mode in ("QR", "QL") and m < n:
        raise DimensionError(f"{mode} needs rows >= cols")
    if mode in ("RQ", "LQ") and n < m:
        raise DimensionError(f"{mode} needs cols >= rows")
    led = ensure_ledger(ledger)
    W = as_dense(A)
    conj = mode in ("RQ", "LQ")
    flip = mode in ("RQ", "QL")
    if conj:
        W = W.conj().T.copy()
    if flip:
        W = W[::-1, ::-1].copy()
    blocks, R = _qr_core(W, led)
    if flip:
        R = R[::-1, ::-1]
    if conj:
        R = R.conj().T
    R = np.ascontiguousarray(R)
    R = np.triu(R) if mode in ("QR", "RQ") else np.tril(R)
    return QRFactors(mode, (m, n), blocks, R, W.shape, flip, conj, W.dtype)


def explicit_q(F, ledger=None, complete=False):
    """Form Q from its reflectors by applying them to the identity."""
    led = ensure_ledger(ledger)
    mc, nc = F.core_shape
    k = mc if complete else nc
    E = np.zeros((mc, k), dtype=F.dtype)
    E[np.arange(k), np.arange(k)] = 1
    flops = 0
    for blk in reversed(F.blocks):
        blk.apply(E)
        flops += blk.flop_count(k)
    led.add_flops(flops)
    for ti, (c0, c1) in enumerate(_tiles(k, led.blocksize)):
        led.touch(("Q", led.tag(F), ti), mc, c1 - c0)
    Q = E
    if F.flip:
        Q = Q[::-1, ::-1]
    if F.conj:
        Q = Q.conj().T
    return np.ascontiguousarray(Q)


def reassemble(F, ledger=None):
    Q = explicit_q(F, ledger)
    if F.mode in ("QR", "QL"):
        return Q @ F.triangular
    return F.triangular @ Q


# ----------------------------------------------------------------------------
# Haar sampling

def haar_orthogonal(n, kind="real64", rng_seed=None, ledger=None):
    """Haar-distributed orthogonal/unitary matrix from QR of a Gaussian."""
    if n < 1:
        raise DimensionError("n must be positive")
    rng = make_rng(rng_seed)
    G = rng.standard_normal((n, n))
    if kind == "complex128":
        G = (G + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    F = factorize(G, "QR", ledger)
    Q = explicit_q(F, ledger)
    d = F.triangular.diagonal()
    ad = np.abs(d)
    phase = np.where(ad > 0, d / np.where(ad > 0, ad, 1), 1)
    return Q * phase[np.newaxis, :]


# ----------------------------------------------------------------------------
# Jacobi reference solvers

def _round_robin(n):
    """Disjoint index pairs for each round of a cyclic tournament."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        if pairs:
            p, q = zip(*pairs)
            rounds.append((np.array(p), np.array(q)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_sym_eig(A, tol=None, max_sweeps=100):
    """Eigenvalues (ascending) and eigenvectors of a real symmetric matrix."""
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError("square matrix required")
    if n > ORACLE_SIZE_CAP:
        raise DimensionError(f"oracle size cap is {ORACLE_SIZE_CAP}")
    nrm = norms(A, "fro")
    if norms(A - A.T, "fro") > 64 * n * EPS * max(nrm, 1e-300) + 1e-300:
        raise NotSymmetricError("matrix is not symmetric")
    A = (A + A.T) / 2
    V = np.eye(n)
    if tol is None:
        tol = n * EPS
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        off = norms(A - np.diag(A.diagonal()), "fro")
        if off <= tol * nrm or n < 2:
            break
        for p, q in rounds:
            apq = A[p, q]
            mask = np.abs(apq) > 1e-300
            if not mask.any():
                continue
            app, aqq = A[p, p], A[q, q]
            safe = np.where(mask, apq, 1.0)
            theta = (aqq - app) / (2 * safe)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1))
            t = np.where(theta == 0, 1.0, t)
            c = 1 / np.sqrt(t * t + 1)
            s = t * c
            c = np.where(mask, c, 1.0)
            s = np.where(mask, s, 0.0)
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
    w = A.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def jacobi_svd(A, tol=None, max_sweeps=100):
    """One-sided Jacobi SVD; singular values descending, A = U diag(s) V^H."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise DimensionError("matrix required")
    m, n = A.shape
    if max(m, n) > ORACLE_SIZE_CAP:
        raise DimensionError(f"oracle size cap is {ORACLE_SIZE_CAP}")
    if m < n:
        s, U, V = jacobi_svd(A.conj().T, tol, max_sweeps)
        return s, V, U
    cplx = np.iscomplexobj(A)
    U = np.array(A, dtype=np.complex128 if cplx else np.float64)
    V = np.eye(n, dtype=U.dtype)
    if tol is None:
        tol = max(n, 2) * EPS
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            Up, Uq = U[:, p], U[:, q]
            alpha = (np.abs(Up) ** 2).sum(axis=0)
            beta = (np.abs(Uq) ** 2).sum(axis=0)
            gamma = (Up.conj() * Uq).sum(axis=0)
            g = np.abs(gamma)
            mask = g > tol * np.sqrt(alpha * beta)
            if not mask.any():
                continue
            rotated = True
            gsafe = np.where(mask, g, 1.0)
            ph = np.where(mask, gamma / gsafe, 1.0)
            zeta = (beta - alpha) / (2 * gsafe)
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1 + zeta * zeta))
            t = np.where(zeta == 0, 1.0, t)
            c = 1 / np.sqrt(1 + t * t)
            s = c * t
            c = np.where(mask, c, 1.0)
            s = np.where(mask, s, 0.0)
            ph = np.conj(ph)
            Bq = Uq * ph
            U[:, p] = c * Up - s * Bq
            U[:, q] = s * Up + c * Bq
            Vp, Vq = V[:, p], V[:, q] * ph
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
        if not rotated:
            break
    sig = np.sqrt((np.abs(U) ** 2).sum(axis=0))
    order = np.argsort(-sig, kind="stable")
    sig, U, V = sig[order], U[:, order], V[:, order]
    big = sig > 0
    U[:, big] = U[:, big] / sig[big]
    if not big.all():
        U = _complete_columns(U, big)
    return sig, U, V


def _complete_columns(U, keep):
    """Replace unflagged columns with orthonormal vectors orthogonal to the rest."""
    m = U.shape[0]
    basis = [U[:, j] for j in np.flatnonzero(keep)]
    out = U.copy()
    e = 0
    for j in np.flatnonzero(~keep):
        while True:
            x = np.zeros(m, dtype=U.dtype)
            x[e % m] = 1
            e += 1
            for b in basis:
                x = x - b * (b.conj() @ x)
            for b in basis:
                x = x - b * (b.conj() @ x)
            nx = np.linalg.norm(x)
            if nx > 0.5 or e > 4 * m:
                break
        x = x / nx
        basis.append(x)
        out[:, j] = x
    return out


# ----------------------------------------------------------------------------
# small dense Schur form (base cases and test triangularizer)

def hessenberg(A):
    """Householder reduction H = Z^H A Z; returns (H, Z)."""
    H = np.array(A, dtype=np.complex128)
    n = H.shape[0]
    Z = np.eye(n, dtype=np.complex128)
    for j in range(n - 2):
        v, tau, beta = house(H[j + 1:, j])
        if tau == 0:
            continue
        v = v.reshape(-1, 1)
        H[j + 1:, :] -= np.conj(tau) * v @ (v.conj().T @ H[j + 1:, :])
        H[:, j + 1:] -= tau * (H[:, j + 1:] @ v) @ v.conj().T
        Z[:, j + 1:] -= tau * (Z[:, j + 1:] @ v) @ v.conj().T
        H[j + 2:, j] = 0
    return H, Z


def small_schur(A, maxiter=None):
    """Complex Schur form A = Z T Z^H by shifted QR iteration (small n)."""
    A = np.asarray(A)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0), complex), np.zeros((0, 0), complex)
    T, Z = hessenberg(A)
    if maxiter is None:
        maxiter = 60 * n
    hi = n - 1
    its = 0
    scale = max(norms(T, "fro"), 1e-300)
    while hi > 0:
        lo = hi
        while lo > 0:
            s = abs(T[lo - 1, lo - 1]) + abs(T[lo, lo])
            if abs(T[lo, lo - 1]) <= EPS * (s if s > 0 else scale):
                T[lo, lo - 1] = 0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            its = 0
            continue
        its += 1
        if its > maxiter:
            raise ArithmeticError("Schur iteration did not converge")
        a, b, c, d = T[hi - 1, hi - 1], T[hi - 1, hi], T[hi, hi - 1], T[hi, hi]
        if its % 11 == 0:
            mu = d + abs(c) * 0.75
        else:
            tr, det = a + d, a * d - b * c
            disc = np.sqrt(tr * tr / 4 - det)
            l1, l2 = tr / 2 + disc, tr / 2 - disc
            mu = l1 if abs(l1 - d) < abs(l2 - d) else l2
        W = T[lo:hi + 1, lo:hi + 1] - mu * np.eye(hi - lo + 1)
        F = factorize(W, "QR")
        Q = explicit_q(F)
        T[lo:hi + 1, :] = Q.conj().T @ T[lo:hi + 1, :]
        T[:, lo:hi + 1] = T[:, lo:hi + 1] @ Q
        Z[:, lo:hi + 1] = Z[:, lo:hi + 1] @ Q
        for i in range(lo + 2, hi + 1):
            T[i, lo:i - 1] = 0
    return np.triu(T), Z


def small_eigvals(A):
    T, _ = small_schur(A)
    return T.diagonal().copy()


# ----------------------------------------------------------------------------
# matrix text format

def write_matrix(path, A):
    A = np.asarray(A)
    kind = scalar_kind(A)
    rows, cols = A.shape
    lines = [f"{rows} {cols} {kind}"]
    for x in A.flatten(order="F"):
        if kind == "complex128":
            lines.append(f"{float(x.real)!r} {float(x.imag)!r}")
        else:
            lines.append(repr(float(x)))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def read_matrix(path):
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix file")
    head = lines[0].split()
    if len(head) != 3 or head[2] not in ("real64", "complex128"):
        raise ValueError("bad header line; expected 'rows cols kind'")
    rows, cols, kind = int(head[0]), int(head[1]), head[2]
    body = lines[1:]
    if len(body) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, found {len(body)}")
    if kind == "complex128":
        vals = np.array([complex(float(a), float(b)) for a, b in (ln.split() for ln in body)])
    else:
        vals = np.array([float(ln) for ln in body])
    return vals.reshape((rows, cols), order="F")
