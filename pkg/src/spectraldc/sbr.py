"""Successive band reduction for symmetric eigenproblems and the SVD.

Pipeline: a dense symmetric matrix is reduced to band form with panel QR
and two-sided block updates, the band is peeled down to tridiagonal by
bulge chasing in one or two sweeps, and the tridiagonal problem is solved
by bisection with inverse iteration.  The SVD follows the same outline
with alternating QR/LQ panels, an upper band, and a bidiagonal matrix
whose singular values come from its zero-diagonal tridiagonal embedding.

Flops are counted per Householder reflector in the matrix-vector model:
a reflector with ``h`` nonzeros applied to ``c`` columns costs
``4*h*c + h`` and a two-sided symmetric update of an ``m x m`` block costs
``4*h*m + 4*h + 1``.  Blocking overheads (compact WY factors, the tree
reconstruction) are not charged, and neither is the O(n^2)-per-eigenvalue
tridiagonal solver.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import dense
from .dense import EPS, larft
from .ledger import CostLedger, ensure_ledger, null_ledger

ALPHA1 = 0.45
ALPHA2 = 0.2
Q_CHUNK = 8


class ScheduleError(ValueError):
    """A sweep plan violates ``c + d <= b`` or does not reach bandwidth one."""


class ReplayOrderError(ValueError):
    """Staged reflectors cannot be replayed by bulge groups without changing the product."""


class BandStructureError(RuntimeError):
    """Fill appeared where the band storage has no room for it."""


def one_sided_flops(h, c):
    """Apply a reflector with ``h`` nonzeros to ``c`` columns (or rows)."""
    return 4 * h * c + h


def two_sided_flops(h, m):
    """Two-sided update of a symmetric ``m x m`` block by one reflector."""
    return 4 * h * m + 4 * h + 1


def _reflector_sizes(h, k):
    return h - np.arange(k)


def _sum_one_sided(h, k, cols, shrinking=False):
    """Flops of ``k`` reflectors of a block with ``h`` rows; ``shrinking``
    means reflector ``t`` sees ``cols - t - 1`` columns (the panel itself)."""
    total = 0
    for t, hh in enumerate(_reflector_sizes(h, k)):
        c = cols - t - 1 if shrinking else cols
        if c > 0:
            total += one_sided_flops(int(hh), c)
    return total


def _sum_two_sided(h, k, m):
    return sum(two_sided_flops(int(hh), m) for hh in _reflector_sizes(h, k))


# ----------------------------------------------------------------------------
# storage

@dataclass
class TridiagonalMatrix:
    d: np.ndarray
    e: np.ndarray

    @property
    def n(self):
        return self.d.size

    def to_dense(self):
        return np.diag(self.d) + np.diag(self.e, 1) + np.diag(self.e, -1)

    def norm(self):
        if self.n == 0:
            return 0.0
        a = np.abs(self.d).copy()
        a[:-1] += np.abs(self.e)
        a[1:] += np.abs(self.e)
        return float(a.max())


class BandedSym:
    """Symmetric band matrix in packed lower storage.

    ``data[r, j]`` holds ``A[j + r, j]``.  Rows ``0..b`` are the band and the
    remaining ``workspace`` rows give room for the bulge created while
    chasing; writing a nonzero anywhere else raises
    :class:`BandStructureError`.
    """

    def __init__(self, n, b, workspace=0, data=None):
        if n < 1 or b < 0:
            raise ValueError("need n >= 1 and b >= 0")
        self.n = int(n)
        self.b = int(b)
        height = self.b + 1 + int(workspace)
        if data is None:
            data = np.zeros((height, self.n))
        self.data = data

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def bands(self):
        return self.data[:self.b + 1]

    @classmethod
    def from_dense(cls, A, b, workspace=0):
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise dense.DimensionError("square matrix required")
        if np.any(np.tril(A, -b - 1) != 0):
            raise BandStructureError(f"entries beyond bandwidth {b}")
        H = cls(n, b, workspace)
        for r in range(min(b, n - 1) + 1):
            H.data[r, :n - r] = np.diagonal(A, -r)
        return H

    def to_dense(self):
        n = self.n
        A = np.zeros((n, n))
        for r in range(min(self.height, n)):
            idx = np.arange(n - r)
            A[idx + r, idx] = self.data[r, :n - r]
            A[idx, idx + r] = self.data[r, :n - r]
        return A

    def fill_width(self):
        """Largest ``i - j`` with a stored nonzero."""
        nz = np.flatnonzero(np.any(self.data != 0, axis=1))
        return int(nz[-1]) if nz.size else 0

    def with_bandwidth(self, b, workspace=0):
        if self.fill_width() > b:
            raise BandStructureError(f"matrix has fill beyond bandwidth {b}")
        H = BandedSym(self.n, b, workspace)
        rows = min(b + 1, self.height)
        H.data[:rows] = self.data[:rows]
        return H

    def _index(self, i0, i1, j0, j1):
        I = np.arange(i0, i1)[:, None]
        J = np.arange(j0, j1)[None, :]
        lo = np.minimum(I, J)
        off = np.abs(I - J)
        return off, np.broadcast_to(lo, off.shape)

    def window(self, i0, i1, j0, j1):
        """Dense copy of ``A[i0:i1, j0:j1]`` using symmetry."""
        off, col = self._index(i0, i1, j0, j1)
        mask = off < self.height
        out = np.zeros(off.shape)
        out[mask] = self.data[off[mask], col[mask]]
        return out

    def store(self, i0, i1, j0, j1, blk):
        """Write the lower-triangle part of ``blk`` into ``A[i0:i1, j0:j1]``."""
        I = np.arange(i0, i1)[:, None]
        J = np.arange(j0, j1)[None, :]
        off = np.broadcast_to(I - J, blk.shape)
        col = np.broadcast_to(J, blk.shape)
        low = off >= 0
        inside = low & (off < self.height)
        if np.any(blk[low & ~inside] != 0):
            raise BandStructureError("fill outside the band workspace")
        self.data[off[inside], col[inside]] = blk[inside]

    def tofile(self, path):
        """Binary form: little-endian int64 header ``(n, b)``, then the band
        columns ``A[j:j+b+1, j]`` in order (zero padded at the bottom)."""
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qq", self.n, self.b))
            fh.write(np.ascontiguousarray(self.bands.T, dtype="<f8").tobytes())

    @classmethod
    def fromfile(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < 16:
            raise ValueError("truncated band file")
        n, b = struct.unpack("<qq", raw[:16])
        body = np.frombuffer(raw[16:], dtype="<f8")
        if body.size != n * (b + 1):
            raise ValueError("band file size does not match its header")
        H = cls(n, b)
        H.data[:] = body.reshape(n, b + 1).T
        return H


class BandBidiag:
    """Upper triangular band matrix, general packed storage.

    ``data[ku + i - j, j]`` holds ``A[i, j]`` for ``-ku <= i - j <= kl``.
    The nominal structure has ``kl = 0`` and ``ku = b``; bulge chasing uses
    extra workspace on both sides.
    """

    def __init__(self, n, b, lower_ws=0, upper_ws=0, data=None):
        self.n = int(n)
        self.b = int(b)
        self.kl = int(lower_ws)
        self.ku = self.b + int(upper_ws)
        if data is None:
            data = np.zeros((self.kl + self.ku + 1, self.n))
        self.data = data

    @classmethod
    def from_dense(cls, A, b, lower_ws=0, upper_ws=0):
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        if np.any(np.tril(A, -1) != 0) or np.any(np.triu(A, b + 1) != 0):
            raise BandStructureError(f"not upper triangular with bandwidth {b}")
        S = cls(n, b, lower_ws, upper_ws)
        S.store(0, n, 0, n, A)
        return S

    def to_dense(self):
        return self.window(0, self.n, 0, self.n)

    def _offsets(self, i0, i1, j0, j1):
        I = np.arange(i0, i1)[:, None]
        J = np.arange(j0, j1)[None, :]
        r = self.ku + I - J
        return r, np.broadcast_to(J, r.shape)

    def window(self, i0, i1, j0, j1):
        r, col = self._offsets(i0, i1, j0, j1)
        mask = (r >= 0) & (r < self.data.shape[0])
        out = np.zeros(r.shape)
        out[mask] = self.data[r[mask], col[mask]]
        return out

    def store(self, i0, i1, j0, j1, blk):
        r, col = self._offsets(i0, i1, j0, j1)
        r = np.broadcast_to(r, blk.shape)
        inside = (r >= 0) & (r < self.data.shape[0])
        if np.any(blk[~inside] != 0):
            raise BandStructureError("fill outside the band workspace")
        self.data[r[inside], col[inside]] = blk[inside]

    def profile(self):
        """``(lower, upper)``: widest stored sub- and superdiagonal with a nonzero."""
        nz = np.flatnonzero(np.any(self.data != 0, axis=1))
        if not nz.size:
            return 0, 0
        return max(0, int(nz[-1]) - self.ku), max(0, self.ku - int(nz[0]))

    def with_bandwidth(self, b, lower_ws=0, upper_ws=0):
        lo, up = self.profile()
        if lo > 0 or up > b:
            raise BandStructureError(f"matrix is not upper banded with bandwidth {b}")
        S = BandBidiag(self.n, b, lower_ws, upper_ws)
        for off in range(b + 1):
            S.data[S.ku - off] = self.data[self.ku - off]
        return S


# ----------------------------------------------------------------------------
# schedule

@dataclass(frozen=True)
class Sweep:
    b: int
    c: int
    d: int


@dataclass
class Schedule:
    b: int
    sweeps: list

    @property
    def s(self):
        return len(self.sweeps)

    def validate(self):
        bi = self.b
        for sw in self.sweeps:
            if sw.b != bi:
                raise ScheduleError(f"sweep starts at bandwidth {sw.b}, expected {bi}")
            if sw.c < 1 or sw.d < 1:
                raise ScheduleError("c and d must be positive")
            if sw.c + sw.d > sw.b:
                raise ScheduleError(f"c + d = {sw.c + sw.d} exceeds b = {sw.b}")
            bi = sw.b - sw.d
        if bi != 1 and self.b >= 1:
            raise ScheduleError(f"schedule ends at bandwidth {bi}, not 1")
        return self


def default_bandwidth(n, M, alpha1=ALPHA1):
    return max(1, min(n - 1, int(alpha1 * math.sqrt(M))))


def plan_schedule(n, b, M, want_vectors=False, alpha2=ALPHA2):
    """One sweep when ``alpha2*M/n < 2``, otherwise two sweeps through
    bandwidth ``b2 = floor(alpha2*M/n)``."""
    if b < 1 or M < 4 or n < 1:
        raise ValueError("need b >= 1, M >= 4 and n >= 1")
    if not 0 < alpha2 < 0.25:
        raise ScheduleError("alpha2 must lie in (0, 1/4)")
    if b == 1:
        return Schedule(1, [])
    b2 = max(int(alpha2 * M / n), 1)
    if b2 <= 1 or b2 >= b:
        sweeps = [Sweep(b, 1, b - 1)]
    else:
        sweeps = [Sweep(b, b2, b - b2), Sweep(b2, 1, b2 - 1)]
    return Schedule(b, sweeps).validate()


@dataclass
class UpdatePlan:
    """Replay grouping: ``k`` parallelograms per group, ``panel_rows`` rows of Q at a time."""

    k: int
    panel_rows: int

    @classmethod
    def for_memory(cls, M, c):
        r = math.isqrt(M)
        return cls(max(1, r // (2 * c)), max(1, r // 4))


# ----------------------------------------------------------------------------
# full to band

def _householder_reconstruct(Q1):
    """Compact WY factors ``(Y, T, D)`` with ``(I - Y T Y^T)[:, :w] = Q1 D``.

    ``Q1`` has orthonormal columns.  ``D`` is a sign matrix chosen during an
    unpivoted LU of ``Q1 - [D; 0]`` so that every pivot has modulus >= 1.
    """
    m, w = Q1.shape
    A = Q1.copy()
    D = np.empty(w)
    for i in range(w):
        D[i] = -1.0 if A[i, i] >= 0 else 1.0
        A[i, i] -= D[i]
        A[i + 1:, i] /= A[i, i]
        A[i + 1:, i + 1:] -= np.outer(A[i + 1:, i], A[i, i + 1:])
    Y = np.tril(A, -1)
    Y[np.arange(w), np.arange(w)] = 1.0
    U = np.triu(A[:w])
    T = -dense.trsm(Y[:w], (U * D[np.newaxis, :]).T, lower=True).T
    return Y, T, D


def _two_sided(S, Y, T):
    """``S <- (I - Y T Y^T)^T S (I - Y T Y^T)`` for symmetric ``S``."""
    X = S @ Y @ T
    W = X - 0.5 * Y @ (T.T @ (Y.T @ X))
    S -= Y @ W.T + W @ Y.T


def _touch_trailing(led, p, o, n, b):
    """Tile traffic of one two-sided block update of ``A[o:, o:]``."""
    first = o // b
    nt = (n + b - 1) // b
    size = lambda t: min(b, n - t * b)
    for I in range(first, nt):
        for K in range(first, nt):
            led.touch(("A", max(I, K), min(I, K)), size(max(I, K)), size(min(I, K)))
            led.touch(("Y", p, K), size(K), b)
        led.touch(("X", p, I), size(I), b)
    for I in range(first, nt):
        for J in range(first, I + 1):
            led.touch(("A", I, J), size(I), size(J))
            led.touch(("Y", p, I), size(I), b)
            led.touch(("X", p, J), size(J), b)
            led.touch(("X", p, I), size(I), b)
            led.touch(("Y", p, J), size(J), b)


def sym_to_band(A, b, accumulate_Q=False, ledger=None):
    """Reduce symmetric ``A`` to a band of half-bandwidth ``b``.

    Returns ``(H, Q)`` with ``Q^T A Q`` equal to the dense form of ``H``;
    ``Q`` is None unless requested.  Each panel ``A[i+b:, i:i+b]`` is
    factored with the tree QR and its reflectors rebuilt into one compact
    WY block for the two-sided trailing update.
    """
    A = dense.as_dense(A)
    if np.iscomplexobj(A):
        raise dense.ScalarKindError("band reduction works on real matrices")
    n = A.shape[0]
    if A.shape != (n, n):
        raise dense.DimensionError("square matrix required")
    if not np.allclose(A, A.T, rtol=0, atol=64 * EPS * max(dense.norms(A, "one"), 1e-300)):
        raise dense.NotSymmetricError("matrix is not symmetric")
    if b < 1:
        raise ValueError("bandwidth must be at least 1")
    if b >= n:
        raise ValueError(f"bandwidth {b} leaves nothing to reduce for n = {n}")
    led = ensure_ledger(ledger)
    A = np.array((A + A.T) / 2, dtype=float)
    scratch = null_ledger(led.M)
    factors = []
    with led.in_phase("sym_to_band"):
        for p, i in enumerate(range(0, n - b - 1, b)):
            o = i + b
            m = n - o
            P = A[o:, i:o]
            for I in range(o // b, (n + b - 1) // b):
                led.touch(("A", I, i // b), min(b, n - I * b), b)
            if not np.any(np.tril(P, -1)):
                continue
            if m >= b:
                F = dense.factorize(P, "QR", scratch)
                Y, T, D = _householder_reconstruct(dense.explicit_q(F, scratch))
                R = np.zeros((m, b))
                R[:b] = D[:, np.newaxis] * F.triangular
            else:
                R = P.copy()
                Y, taus = dense._geqr2(R)
                T = larft(Y, taus)
            led.add_flops(_sum_one_sided(m, T.shape[0], b, shrinking=True))
            # Q^T from the left on rows o: and Q from the right on columns
            # o:, both over the full symmetric block A[i:, i:]
            k = T.shape[0]
            Yp = np.zeros((m + b, k))
            Yp[b:] = Y
            _two_sided(A[i:, i:], Yp, T)
            led.add_flops(_sum_two_sided(m, k, m + b))
            A[o:, i:o] = R
            A[i:o, o:] = R.T
            _touch_trailing(led, p, i, n, b)
            factors.append((o, Y, T))
        A[np.abs(np.subtract.outer(np.arange(n), np.arange(n))) > b] = 0.0
        H = BandedSym.from_dense(A, b)
        Q = None
        if accumulate_Q:
            Q = np.eye(n)
            with led.in_phase("form_q"):
                for o, Y, T in reversed(factors):
                    C = Q[o:, o:]
                    C -= Y @ (T @ (Y.T @ C))
                    led.add_flops(_sum_one_sided(n - o, T.shape[0], n - o))
    return H, Q


# ----------------------------------------------------------------------------
# band to tridiagonal

class ReflectorStore:
    """Staged chase transformations keyed by (parallelogram i, bulge j).

    Entries must arrive in generation order: all bulges of parallelogram
    ``i`` (``j = 1, 2, ...``) before any of parallelogram ``i + 1``.
    """

    def __init__(self):
        self.entries = []
        self._last = (0, 0)

    def add(self, i, j, s, V, T):
        li, lj = self._last
        ok = (i == li and j == lj + 1) or (i > li and j == 1)
        if not ok:
            raise ReplayOrderError(f"reflector ({i}, {j}) staged after ({li}, {lj})")
        self.entries.append((i, j, s, V, T))
        self._last = (i, j)

    def __len__(self):
        return len(self.entries)

    def clear(self):
        self.entries = []
        self._last = (0, 0)

    def words(self):
        return sum(V.size for _, _, _, V, _ in self.entries)


def _check_replay(entries):
    """Reject stores whose bulge-group replay would reorder overlapping reflectors."""
    if not entries:
        return
    seen = set()
    for i, j, *_ in entries:
        if (i, j) in seen:
            raise ReplayOrderError(f"reflector ({i}, {j}) staged twice")
        seen.add((i, j))
    I = np.array([e[0] for e in entries])
    J = np.array([e[1] for e in entries])
    S0 = np.array([e[2] for e in entries])
    S1 = S0 + np.array([e[3].shape[0] for e in entries])
    # replay puts (i, j) before (i2, j2) when j > j2; generation put it after when i > i2
    for t in range(len(entries)):
        later = (I[t] > I) & (J[t] > J)
        overlap = (S0[t] < S1) & (S0 < S1[t])
        if np.any(later & overlap):
            u = int(np.flatnonzero(later & overlap)[0])
            raise ReplayOrderError(
                f"reflectors ({I[t]}, {J[t]}) and ({I[u]}, {J[u]}) overlap but would be swapped")


def apply_naive(Q, store):
    """Right-multiply ``Q`` by the staged transformations in generation order."""
    Q = np.array(Q, dtype=float, copy=True)
    for _, _, s, V, T in store.entries:
        C = Q[:, s:s + V.shape[0]]
        C -= (C @ V) @ T @ V.T
    return Q


def update_vectors(Q, store, plan, ledger=None, inplace=False):
    """Replay staged transformations onto ``Q`` from the right.

    Rows are processed ``plan.panel_rows`` at a time; inside a panel the
    bulge groups go from the last bulge number down to the first, and
    within a group parallelograms go in increasing order.
    """
    entries = store.entries if isinstance(store, ReflectorStore) else list(store)
    _check_replay(entries)
    led = ensure_ledger(ledger)
    if not inplace:
        Q = np.array(Q, dtype=float, copy=True)
    if not entries:
        return Q
    groups = {}
    for e in entries:
        groups.setdefault(e[1], []).append(e)
    order = [e for j in sorted(groups, reverse=True) for e in sorted(groups[j], key=lambda x: x[0])]
    m = Q.shape[0]
    B = max(1, plan.panel_rows)
    flops = 0
    with led.in_phase("update_vectors"):
        tq = led.tag(Q)
        for p0 in range(0, m, B):
            p1 = min(m, p0 + B)
            for i, j, s, V, T in order:
                h, k = V.shape
                led.touch(("U", led.tag(V)), h, k + k)
                for ch in range(s // Q_CHUNK, (s + h - 1) // Q_CHUNK + 1):
                    led.touch(("Q", tq, p0, ch), p1 - p0, min(Q_CHUNK, Q.shape[1] - ch * Q_CHUNK))
                C = Q[p0:p1, s:s + h]
                C -= (C @ V) @ T @ V.T
                flops += _sum_one_sided(h, k, p1 - p0)
        led.add_flops(flops)
    return Q


def _chase_step(H, j, s, c, hmax, b, led, flops):
    """Annihilate ``A[s:s+hmax, j:j+c]`` below its leading triangle by one
    block reflector on rows ``s:s+hmax`` and update everything it touches.

    Returns ``(V, T)`` or None when the window is too small to matter.
    """
    n = H.n
    e = min(n, s + hmax)
    h = e - s
    if h < 2:
        return None
    cw = min(c, h - 1)
    P = H.window(s, e, j, j + cw)
    V, taus = dense._geqr2(P)
    H.store(s, e, j, j + cw, np.triu(P))
    T = larft(V, taus)
    k = taus.size
    flops[0] += _sum_one_sided(h, k, cw, shrinking=True)
    if s > j + cw:
        L = H.window(s, e, j + cw, s)
        L -= V @ (T.T @ (V.T @ L))
        H.store(s, e, j + cw, s, L)
        flops[0] += _sum_one_sided(h, k, s - j - cw)
    S = H.window(s, e, s, e)
    _two_sided(S, V, T)
    H.store(s, e, s, e, S)
    flops[0] += _sum_two_sided(h, k, h)
    f = min(n, e + b)
    if f > e:
        R = H.window(e, f, s, e)
        R -= (R @ V) @ T @ V.T
        H.store(e, f, s, e, R)
        flops[0] += _sum_one_sided(h, k, f - e)
    for col in range(j, e):
        led.touch(("band", col), H.b + 1)
    led.touch(("bulge",), h, h)
    return V, T


def _sym_sweep(H, sw, led, words_led, Q, plan, flops, keep=None):
    """One sweep ``b -> b - d``; returns the number of reflector blocks.

    With ``keep`` (and no ``Q``) every transformation is staged there and
    nothing is replayed.
    """
    n = H.n
    b, c, d = sw.b, sw.c, sw.d
    store = keep if keep is not None else (ReflectorStore() if Q is not None else None)
    count = 0
    par = 0
    for j in range(0, n, c):
        s = j + b - d
        if s >= n - 1:
            break
        par += 1
        out = _chase_step(H, j, s, c, c + d, b, words_led, flops)
        bulge = 1
        while out is not None:
            count += 1
            if store is not None:
                store.add(par, bulge, s, *out)
            if s + c + d >= n:
                break
            j, s = s, s + b
            bulge += 1
            out = _chase_step(H, j, s, c, c + d, b, words_led, flops)
        if Q is not None and par % plan.k == 0:
            update_vectors(Q, store, plan, led, inplace=True)
            store.clear()
    if Q is not None and len(store):
        update_vectors(Q, store, plan, led, inplace=True)
    return count


def stage_sweep(H, sweep):
    """Run one sweep on a copy of ``H`` and keep every transformation.

    Returns the reduced band and a :class:`ReflectorStore` in generation
    order, ready for :func:`update_vectors` or :func:`apply_naive`.
    """
    cur = BandedSym(H.n, H.b, 0, H.data.copy()).with_bandwidth(sweep.b, sweep.c + sweep.d)
    store = ReflectorStore()
    _sym_sweep(cur, sweep, null_ledger(), null_ledger(), None, None, [0], keep=store)
    return cur.with_bandwidth(sweep.b - sweep.d), store


def band_to_tridiag(H, sched, Q=None, plan=None, ledger=None):
    """Bulge-chase ``H`` down to a tridiagonal matrix following ``sched``.

    When ``Q`` is given it is overwritten with ``Q U`` where ``U`` is the
    accumulated orthogonal transformation (so ``(QU)^T A (QU)`` is the
    returned tridiagonal matrix if ``Q^T A Q = H``).
    """
    if not isinstance(H, BandedSym):
        raise TypeError("expected a BandedSym")
    sched.validate()
    if H.fill_width() > H.b:
        raise BandStructureError("band storage holds fill")
    if sched.sweeps and H.b != sched.b:
        raise ScheduleError(f"schedule starts at bandwidth {sched.b}, matrix has {H.b}")
    if not sched.sweeps and H.b > 1:
        raise ScheduleError("empty schedule for a matrix that is not tridiagonal")
    led = ensure_ledger(ledger)
    n = H.n
    if Q is not None and Q.shape[1] != n:
        raise dense.DimensionError("Q must have n columns")
    words_led = CostLedger(M=max(4, led.M // 4), enabled=led.enabled)
    flops = [0]
    cur = BandedSym(n, H.b, 0, H.data.copy())
    with led.in_phase("band_to_tridiag"):
        for sw in sched.sweeps:
            cur = cur.with_bandwidth(sw.b, sw.c + sw.d)
            words_led.evict("band")
            p = plan or UpdatePlan.for_memory(led.M, sw.c)
            _sym_sweep(cur, sw, led, words_led, Q, p, flops)
            if cur.fill_width() > sw.b - sw.d:
                raise BandStructureError(
                    f"sweep left fill at width {cur.fill_width()} > {sw.b - sw.d}")
            cur = cur.with_bandwidth(sw.b - sw.d)
        led.record(words=words_led.words_moved, messages=words_led.messages, flops=flops[0])
    d = cur.data[0].copy()
    e = cur.data[1, :n - 1].copy() if cur.height > 1 else np.zeros(n - 1)
    return TridiagonalMatrix(d, e)


# ----------------------------------------------------------------------------
# tridiagonal eigensolver: bisection and inverse iteration

def _split_points(T):
    """Indices where the off-diagonal is negligible; blocks are unreduced."""
    d, e = T.d, T.e
    tiny = EPS * (np.abs(d[:-1]) + np.abs(d[1:]))
    cut = np.flatnonzero(np.abs(e) <= np.maximum(tiny, np.finfo(float).tiny))
    bounds = [0] + [int(c) + 1 for c in cut] + [T.n]
    return [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]


def _sturm_count(d, e2, x, pivmin):
    """Number of eigenvalues below each entry of ``x``."""
    q = d[0] - x
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    cnt = (q < 0).astype(int)
    for i in range(1, d.size):
        q = d[i] - x - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        cnt += q < 0
    return cnt


def _bisect(d, e, tnorm):
    n = d.size
    if n == 1:
        return d.copy()
    e2 = e * e
    pivmin = max(np.finfo(float).tiny, EPS * EPS * max(float((e2).max()), 1e-300))
    r = np.zeros(n)
    r[:-1] += np.abs(e)
    r[1:] += np.abs(e)
    lo0 = float((d - r).min())
    hi0 = float((d + r).max())
    pad = 2 * EPS * max(abs(lo0), abs(hi0)) + pivmin
    lo = np.full(n, lo0 - pad)
    hi = np.full(n, hi0 + pad)
    idx = np.arange(n)
    tol = 2 * EPS * max(tnorm, np.finfo(float).tiny)
    for _ in range(200):
        active = hi - lo > tol + 2 * EPS * np.maximum(np.abs(lo), np.abs(hi))
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        below = _sturm_count(d, e2, mid, pivmin) > idx
        hi = np.where(active & below, mid, hi)
        lo = np.where(active & ~below, mid, lo)
    return 0.5 * (lo + hi)


def _tridiag_solve_many(d, e, lam, rhs, floor):
    """Solve ``(T - lam_k I) x_k = rhs[:, k]`` for all ``k`` with partial pivoting."""
    n, K = rhs.shape
    u0 = np.empty((n, K))
    u1 = np.zeros((n, K))
    u2 = np.zeros((n, K))
    mult = np.zeros((n, K))
    swap = np.zeros((n, K), dtype=bool)
    a = d[0] - lam
    b1 = np.full(K, e[0]) if n > 1 else np.zeros(K)
    for i in range(n - 1):
        c = e[i]
        dd = d[i + 1] - lam
        f = e[i + 1] if i + 1 < n - 1 else 0.0
        sw = np.abs(a) < abs(c)
        swap[i] = sw
        u0[i] = np.where(sw, c, a)
        u1[i] = np.where(sw, dd, b1)
        u2[i] = np.where(sw, f, 0.0)
        piv = np.where(sw, c, a)
        piv = np.where(np.abs(piv) < floor, np.copysign(floor, piv + 0.0), piv)
        m = np.where(sw, a, c) / piv
        mult[i] = m
        na = np.where(sw, b1 - m * dd, dd - m * b1)
        nb = np.where(sw, -m * f, f)
        a, b1 = na, nb
    u0[n - 1] = a
    u0 = np.where(np.abs(u0) < floor, np.where(u0 < 0, -floor, floor), u0)
    y = rhs.copy()
    for i in range(n - 1):
        sw = swap[i]
        yi = np.where(sw, y[i + 1], y[i])
        yj = np.where(sw, y[i], y[i + 1])
        y[i] = yi
        y[i + 1] = yj - mult[i] * yi
    x = np.empty_like(y)
    x[n - 1] = y[n - 1] / u0[n - 1]
    if n > 1:
        x[n - 2] = (y[n - 2] - u1[n - 2] * x[n - 1]) / u0[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (y[i] - u1[i] * x[i + 1] - u2[i] * x[i + 2]) / u0[i]
    return x


def _inverse_iteration(d, e, lam, tnorm, rng, iters=3):
    n = d.size
    K = lam.size
    if n == 1:
        return np.ones((1, K))
    floor = EPS * max(tnorm, np.finfo(float).tiny)
    gaps = np.diff(lam)
    cluster_tol = 1e-3 * max(tnorm, np.finfo(float).tiny)
    starts = [0] + [int(g) + 1 for g in np.flatnonzero(gaps > cluster_tol)]
    clusters = [(s, starts[t + 1] if t + 1 < len(starts) else K) for t, s in enumerate(starts)]
    # nudge coincident shifts apart so the solves differ
    shifted = lam.copy()
    for s0, s1 in clusters:
        for t in range(s0 + 1, s1):
            if shifted[t] - shifted[t - 1] < 10 * floor:
                shifted[t] = shifted[t - 1] + 10 * floor
    X = rng.standard_normal((n, K))
    for _ in range(iters):
        X = _tridiag_solve_many(d, e, shifted, X, floor)
        X /= np.linalg.norm(X, axis=0)[np.newaxis, :]
        for s0, s1 in clusters:
            for t in range(s0 + 1, s1):
                for r in range(s0, t):
                    X[:, t] -= (X[:, r] @ X[:, t]) * X[:, r]
                X[:, t] /= np.linalg.norm(X[:, t])
    return X


def tridiag_eig(T, want_vectors=False, seed=0):
    """Eigenvalues (ascending) and optionally orthonormal eigenvectors of a
    symmetric tridiagonal matrix."""
    if not isinstance(T, TridiagonalMatrix):
        raise TypeError("expected a TridiagonalMatrix")
    n = T.n
    if n == 0:
        return np.zeros(0), (np.zeros((0, 0)) if want_vectors else None)
    tnorm = T.norm()
    lam = np.empty(n)
    Z = np.zeros((n, n)) if want_vectors else None
    rng = dense.make_rng(seed)
    pos = 0
    for b0, b1 in _split_points(T):
        d = T.d[b0:b1]
        e = T.e[b0:b1 - 1]
        w = _bisect(d, e, tnorm)
        lam[pos:pos + w.size] = w
        if want_vectors:
            Z[b0:b1, pos:pos + w.size] = _inverse_iteration(d, e, w, tnorm, rng)
        pos += w.size
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    if want_vectors:
        Z = Z[:, order]
    return lam, Z


# ----------------------------------------------------------------------------
# symmetric driver and the unblocked baseline

def sbr_sym_eig(A, M, want_vectors=False, ledger=None, b=None):
    """Eigenvalues (ascending) and optionally eigenvectors of symmetric ``A``."""
    A = dense.as_dense(A)
    n = A.shape[0]
    led = ensure_ledger(ledger)
    if n == 1:
        return A.real.diagonal().copy(), (np.ones((1, 1)) if want_vectors else None)
    b = default_bandwidth(n, M) if b is None else int(b)
    b = min(b, n - 1)
    H, Q = sym_to_band(A, b, want_vectors, led)
    sched = plan_schedule(n, b, M, want_vectors)
    T = band_to_tridiag(H, sched, Q, None, led)
    lam, Z = tridiag_eig(T, want_vectors)
    if not want_vectors:
        return lam, None
    with led.in_phase("back_transform"):
        X = dense.matmul(Q, Z, led)
    return lam, X


def direct_tridiagonalize(A, ledger=None):
    """Unblocked Householder tridiagonalization driven by matrix-vector
    products; every step streams the whole trailing matrix."""
    A = np.array(dense.as_dense(A), dtype=float)
    n = A.shape[0]
    led = ensure_ledger(ledger)
    with led.in_phase("direct_tridiag"):
        for k in range(n - 2):
            v, tau, beta = dense.house(A[k + 1:, k].copy())
            A[k + 1:, k] = 0.0
            A[k + 1, k] = beta
            A[k, k + 1:] = A[k + 1:, k]
            m = n - k - 1
            S = A[k + 1:, k + 1:]
            for col in range(k + 1, n):
                led.touch(("col", col), m)
            y = tau * (S @ v)
            w = y - 0.5 * tau * (y @ v) * v
            for col in range(k + 1, n):
                led.touch(("col", col), m)
            S -= np.outer(v, w) + np.outer(w, v)
            led.add_flops(two_sided_flops(m, m))
    return TridiagonalMatrix(A.diagonal().copy(), np.diagonal(A, 1).copy())


# ----------------------------------------------------------------------------
# SVD

def _touch_rect(led, tag, r0, r1, c0, c1, b):
    for I in range(r0 // b, (r1 + b - 1) // b):
        for J in range(c0 // b, (c1 + b - 1) // b):
            led.touch((tag, I, J), min(b, r1 - I * b), min(b, c1 - J * b))


def svd_to_band(A, b, ledger=None, want_vectors=False):
    """``U^T A V`` upper triangular with ``b`` superdiagonals.

    Column panels are reduced by QR and row panels by LQ, alternately.
    Returns ``(S, U, V)`` with ``S`` a :class:`BandBidiag`.
    """
    A = np.array(dense.as_dense(A), dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise dense.DimensionError("square matrix required (reduce rectangular input by QR first)")
    if b < 1:
        raise ValueError("bandwidth must be at least 1")
    b = min(b, max(n - 1, 1))
    led = ensure_ledger(ledger)
    U = np.eye(n) if want_vectors else None
    V = np.eye(n) if want_vectors else None
    with led.in_phase("svd_to_band"):
        for i in range(0, n, b):
            w = min(b, n - i)
            m = n - i
            P = A[i:, i:i + w]
            if m > 1 and np.any(np.tril(P, -1)):
                R = P.copy()
                Y, taus = dense._geqr2(R)
                T = larft(Y, taus)
                A[i:, i:i + w] = np.triu(R)
                C = A[i:, i + w:]
                C -= Y @ (T.T @ (Y.T @ C))
                k = taus.size
                led.add_flops(_sum_one_sided(m, k, w, shrinking=True)
                              + _sum_one_sided(m, k, n - i - w))
                _touch_rect(led, "A", i, n, i, n, b)
                if U is not None:
                    C = U[:, i:]
                    C -= (C @ Y) @ T @ Y.T
            o = i + w
            if o >= n:
                break
            mc = n - o
            P = A[i:i + w, o:]
            if mc > 1 and np.any(np.triu(P, 1)):
                R = P.T.copy()
                Y, taus = dense._geqr2(R)
                T = larft(Y, taus)
                A[i:i + w, o:] = np.triu(R).T
                C = A[i + w:, o:]
                C -= (C @ Y) @ T @ Y.T
                k = taus.size
                led.add_flops(_sum_one_sided(mc, k, w, shrinking=True)
                              + _sum_one_sided(mc, k, n - i - w))
                _touch_rect(led, "A", i, n, o, n, b)
                if V is not None:
                    C = V[:, o:]
                    C -= (C @ Y) @ T @ Y.T
        A[np.tril_indices(n, -1)] = 0.0
        A[np.triu_indices(n, b + 1)] = 0.0
    return BandBidiag.from_dense(A, b), U, V


def _svd_right(S, r0, s, c, hmax, led, flops):
    """LQ on rows ``r0:r0+c`` over columns ``s:s+hmax``; returns ``(e, V, T)``."""
    n = S.n
    e = min(n, s + hmax)
    h = e - s
    if h < 2 or r0 >= n:
        return None
    cw = min(c, h - 1, n - r0)
    P = S.window(r0, r0 + cw, s, e).T.copy()
    V, taus = dense._geqr2(P)
    S.store(r0, r0 + cw, s, e, np.triu(P).T)
    T = larft(V, taus)
    k = taus.size
    flops[0] += _sum_one_sided(h, k, cw, shrinking=True)
    if e > r0 + cw:
        C = S.window(r0 + cw, e, s, e)
        C -= (C @ V) @ T @ V.T
        S.store(r0 + cw, e, s, e, C)
        flops[0] += _sum_one_sided(h, k, e - r0 - cw)
    for col in range(r0, e):
        led.touch(("bcol", col), S.data.shape[0])
    return e, V, T


def _svd_left(S, s, c, hmax, b, led, flops):
    """QR on rows ``s:s+hmax`` of columns ``s:s+c``; returns ``(e, V, T)``."""
    n = S.n
    e = min(n, s + hmax)
    h = e - s
    if h < 2:
        return None
    cw = min(c, h - 1)
    P = S.window(s, e, s, s + cw)
    V, taus = dense._geqr2(P)
    S.store(s, e, s, s + cw, np.triu(P))
    T = larft(V, taus)
    k = taus.size
    flops[0] += _sum_one_sided(h, k, cw, shrinking=True)
    g = min(n, e + b)
    if g > s + cw:
        C = S.window(s, e, s + cw, g)
        C -= V @ (T.T @ (V.T @ C))
        S.store(s, e, s + cw, g, C)
        flops[0] += _sum_one_sided(h, k, g - s - cw)
    for col in range(s, g):
        led.touch(("bcol", col), S.data.shape[0])
    return e, V, T


def band_to_bidiag(S, sched, U=None, V=None, ledger=None):
    """Chase an upper band down to bidiagonal; returns ``(diag, superdiag)``.

    ``U`` and ``V`` (if given) are updated in place so that ``U^T A V`` is
    the bidiagonal matrix whenever ``U^T A V = S`` on entry.
    """
    sched.validate()
    if sched.sweeps and S.b != sched.b:
        raise ScheduleError(f"schedule starts at bandwidth {sched.b}, matrix has {S.b}")
    led = ensure_ledger(ledger)
    n = S.n
    words_led = CostLedger(M=max(4, led.M // 4), enabled=led.enabled)
    flops = [0]
    cur = S
    with led.in_phase("band_to_bidiag"):
        for sw in sched.sweeps:
            b, c, d = sw.b, sw.c, sw.d
            h = c + d
            cur = cur.with_bandwidth(b, h, h)
            for i0 in range(0, n, c):
                s = i0 + b - d
                if s >= n - 1:
                    break
                r0 = i0
                while True:
                    out = _svd_right(cur, r0, s, c, h, words_led, flops)
                    if out is None:
                        break
                    e, Vr, Tr = out
                    if V is not None:
                        C = V[:, s:e]
                        C -= (C @ Vr) @ Tr @ Vr.T
                    out = _svd_left(cur, s, c, h, b, words_led, flops)
                    if out is None:
                        break
                    e, Vl, Tl = out
                    if U is not None:
                        C = U[:, s:e]
                        C -= (C @ Vl) @ Tl @ Vl.T
                    if s + b >= n - 1:
                        break
                    r0, s = s, s + b
            lo, up = cur.profile()
            if lo > 0 or up > b - d:
                raise BandStructureError(f"sweep left fill (lower {lo}, upper {up})")
            cur = cur.with_bandwidth(b - d)
        led.record(words=words_led.words_moved, messages=words_led.messages, flops=flops[0])
    diag = cur.data[cur.ku].copy()
    sup = cur.data[cur.ku - 1, 1:].copy() if cur.ku >= 1 else np.zeros(n - 1)
    return diag, sup


def bidiag_svd(diag, sup, want_vectors=False):
    """Singular values (descending) of an upper bidiagonal matrix from the
    positive eigenvalues of its zero-diagonal ``2n x 2n`` tridiagonal form."""
    n = diag.size
    e = np.zeros(2 * n - 1)
    e[0::2] = diag
    e[1::2] = sup
    lam, Z = tridiag_eig(TridiagonalMatrix(np.zeros(2 * n), e), want_vectors)
    top = np.arange(2 * n - 1, n - 1, -1)
    sig = np.maximum(lam[top], 0.0)
    if not want_vectors:
        return sig, None, None
    Zt = Z[:, top] * math.sqrt(2.0)
    Vb = Zt[0::2]
    Ub = Zt[1::2]
    # tiny singular values pair up with their negatives; tidy the columns
    Ub = _orthonormal_fix(Ub)
    Vb = _orthonormal_fix(Vb)
    return sig, Ub, Vb


def _orthonormal_fix(X):
    nrm = np.linalg.norm(X, axis=0)
    bad = nrm < 0.5
    X = X / np.where(bad, 1.0, nrm)[np.newaxis, :]
    if np.any(bad):
        X = dense._complete_columns(X, ~bad)
    return X


def sbr_svd(A, M, want_vectors=False, ledger=None, b=None):
    """Singular values (descending) and optionally ``U, V`` with ``A = U diag(s) V^T``."""
    A = dense.as_dense(A)
    if np.iscomplexobj(A):
        raise dense.ScalarKindError("band reduction works on real matrices")
    n = A.shape[0]
    if A.shape != (n, n):
        raise dense.DimensionError("square matrix required")
    led = ensure_ledger(ledger)
    if n == 1:
        s = abs(float(A[0, 0]))
        if not want_vectors:
            return np.array([s]), None, None
        sg = 1.0 if A[0, 0] >= 0 else -1.0
        return np.array([s]), np.array([[sg]]), np.ones((1, 1))
    b = default_bandwidth(n, M) if b is None else min(int(b), n - 1)
    S, U, V = svd_to_band(A, b, led, want_vectors)
    sched = plan_schedule(n, b, M, want_vectors)
    diag, sup = band_to_bidiag(S, sched, U, V, led)
    sig, Ub, Vb = bidiag_svd(diag, sup, want_vectors)
    if not want_vectors:
        return sig, None, None
    with led.in_phase("back_transform"):
        Uo = dense.matmul(U, Ub, led)
        Vo = dense.matmul(V, Vb, led)
    return sig, Uo, Vo
