"""Randomized recursive drivers built on the single divide steps."""
from __future__ import annotations

import math

import numpy as np

from .. import dense
from ..dense import EPS, norms
from ..ledger import ensure_ledger
from . import geometry
from .core import StrategyConfig, line_pencil, rgnep_step, rnep_step, rsep_step
from .tree import Enclosure, SpectralTree

ATTEMPT_CAP = 60
# radii 2**(2**k) stay finite for k < 10
LADDER_STEPS = 9


class _Context:
    def __init__(self, cfg, ledger):
        self.cfg = cfg or StrategyConfig()
        self.led = ensure_ledger(ledger)
        self.rng = np.random.default_rng(np.random.SeedSequence(self.cfg.rng_seed))

    def seed(self):
        return int(self.rng.integers(2 ** 62))


def _schur_leaf(A):
    T, Z = dense.small_schur(A)
    return SpectralTree("leaf_eigenvalues", A.shape[0], eigenvalues_=T.diagonal().copy(),
                        vectors=Z, info={"block": A})


def _enclosure_leaf(A, enc, **info):
    info["block"] = A
    return SpectralTree("leaf_enclosure", A.shape[0], enclosure=enc, info=info)


def _split_node(n, Q, left, right, **info):
    return SpectralTree("split", n, transform=Q, left=left, right=right, info=info)


# ----------------------------------------------------------------------------
# nonsymmetric: random lines through a shrinking disk

def nonsym_strategy(A, cfg=None, ledger=None):
    """Divide the spectrum of a square matrix by random lines until it is triangular.

    Failed regions end as convex-polygon enclosures; the leaves and the split
    transforms together give a block Schur form.
    """
    ctx = _Context(cfg, ledger)
    A = dense.as_dense(A)
    if A.shape[0] != A.shape[1]:
        raise dense.DimensionError("square matrix required")
    return _nonsym_node(A, [], ctx)


def _starting_disk(A, halfplanes):
    R = dense.gershgorin_radius(A)
    c = 0j
    if halfplanes and R > 0:
        poly = geometry.region_polygon(c, R, halfplanes)
        if len(poly) >= 1:
            c2, R2 = geometry.min_enclosing_circle(poly)
            if R2 < R:
                c, R = c2, R2
    return c, R


def _nonsym_node(A, halfplanes, ctx):
    cfg = ctx.cfg
    n = A.shape[0]
    if n == 1:
        return SpectralTree("leaf_eigenvalues", 1, eigenvalues_=A.diagonal().astype(complex),
                            vectors=np.eye(1), info={"block": A})
    if n <= cfg.base_case_size:
        return _schur_leaf(A)
    c, R = _starting_disk(A, halfplanes)
    if R == 0:
        return SpectralTree("leaf_eigenvalues", n, eigenvalues_=np.zeros(n, complex),
                            vectors=np.eye(n), info={"block": A})
    failures = streak = attempts = 0
    theta = 0.0
    while True:
        attempts += 1
        if streak == 1:
            theta = theta + math.pi / 2
            a = float(ctx.rng.uniform(-0.5, 0.5))
        else:
            theta, a = geometry.random_line(ctx.rng)
        pencil = line_pencil(A, theta, a, c, R)
        with ctx.led.in_phase("nonsym_split"):
            out = rnep_step(A, cfg, ctx.led, pencil, ctx.seed())
        if out.success:
            k = out.k
            hp_left, hp_right = list(halfplanes), list(halfplanes)
            if out.count == k:
                hp_left.append(geometry.halfplane_for_line(theta, a, c, R, True))
                hp_right.append(geometry.halfplane_for_line(theta, a, c, R, False))
            Ah = out.A_hat
            left = _nonsym_node(Ah[:k, :k].copy(), hp_left, ctx)
            right = _nonsym_node(Ah[k:, k:].copy(), hp_right, ctx)
            return _split_node(n, out.Q_R, left, right, k=k, metric=out.offdiag_metric,
                               iterations=out.iterations, line=(theta, a, c, R),
                               A_hat=Ah, block=A)
        if out.converged and out.count in (0, n):
            halfplanes = halfplanes + [geometry.halfplane_for_line(theta, a, c, R, out.count == n)]
            streak += 1
            failures = 0
            if streak >= 2:
                poly = geometry.region_polygon(c, R, halfplanes)
                if poly:
                    c2, R2 = geometry.min_enclosing_circle(poly)
                    if R2 < R:
                        c, R = c2, R2
                streak = 0
        else:
            failures += 1
            streak = 0
        if failures >= cfg.max_failed_splits or attempts >= ATTEMPT_CAP:
            poly = geometry.region_polygon(c, R, halfplanes)
            enc = Enclosure("convex_polygon", poly, n)
            return _enclosure_leaf(A, enc, attempts=attempts, disk=(c, R))


# ----------------------------------------------------------------------------
# symmetric: random points in a shrinking interval

def sym_strategy(A, cfg=None, ledger=None):
    """Eigen-decomposition of a Hermitian matrix by random interval bisection."""
    ctx = _Context(cfg, ledger)
    A = dense.as_dense(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise dense.DimensionError("square matrix required")
    scale = max(norms(A, "fro"), 0.0)
    if norms(A - A.conj().T, "fro") > 1e-10 * max(scale, 1e-300):
        raise dense.NotSymmetricError("matrix is not symmetric")
    A = (A + A.conj().T) / 2
    return _sym_node(A, None, scale, ctx)


def _sym_leaf(A):
    n = A.shape[0]
    if np.iscomplexobj(A):
        T, Z = dense.small_schur(A)
        w = T.diagonal().real.copy()
        order = np.argsort(w)
        return SpectralTree("leaf_eigenvalues", n, eigenvalues_=w[order], vectors=Z[:, order],
                            info={"block": A})
    w, V = dense.jacobi_sym_eig(A)
    return SpectralTree("leaf_eigenvalues", n, eigenvalues_=w, vectors=V, info={"block": A})


def _sym_node(A, bounds, scale, ctx):
    cfg = ctx.cfg
    n = A.shape[0]
    lo, hi = dense.gershgorin_interval(A)
    if bounds is not None:
        lo2, hi2 = max(lo, bounds[0]), min(hi, bounds[1])
        if lo2 <= hi2:
            lo, hi = lo2, hi2
    if n == 1:
        return SpectralTree("leaf_eigenvalues", 1, eigenvalues_=A.diagonal().real.copy(),
                            vectors=np.eye(1), info={"block": A})
    if hi - lo <= cfg.cluster_tol * scale:
        return _enclosure_leaf(A, Enclosure("interval", (lo, hi), n))
    if n <= cfg.base_case_size:
        return _sym_leaf(A)
    failures = attempts = 0
    while True:
        attempts += 1
        w = hi - lo
        x = float(ctx.rng.uniform(lo + w / 4, hi - w / 4))
        pencil = line_pencil(A, 0.0, 0.0, x, w / 2)
        with ctx.led.in_phase("sym_split"):
            out = rsep_step(A, cfg, ctx.led, pencil, ctx.seed())
        if out.success:
            k = out.k
            if out.count == k:
                b_left, b_right = (x, hi), (lo, x)
            else:
                b_left = b_right = (lo, hi)
            Ah = out.A_hat
            left = _sym_node(Ah[:k, :k].copy(), b_left, scale, ctx)
            right = _sym_node(Ah[k:, k:].copy(), b_right, scale, ctx)
            return _split_node(n, out.Q_R, left, right, k=k, metric=out.offdiag_metric,
                               iterations=out.iterations, point=x, A_hat=Ah, block=A)
        if out.converged and out.count in (0, n):
            if out.count == n:
                lo = x
            else:
                hi = x
            failures = 0
            if hi - lo <= cfg.cluster_tol * scale:
                return _enclosure_leaf(A, Enclosure("interval", (lo, hi), n))
        else:
            failures += 1
        if failures >= cfg.max_failed_splits or attempts >= ATTEMPT_CAP:
            return _enclosure_leaf(A, Enclosure("interval", (lo, hi), n), attempts=attempts)


def rsvd_drive(A, cfg=None, ledger=None):
    """Singular values and vectors through the Hermitian embedding ``[[0, A], [A^H, 0]]``.

    Returns ``(s, U, V)`` with ``s`` descending and ``A = U diag(s) V^H``.
    Rectangular input is first reduced to a square triangular factor.
    """
    led = ensure_ledger(ledger)
    A = dense.as_dense(A)
    m, n = A.shape
    if m < n:
        s, U, V = rsvd_drive(A.conj().T, cfg, ledger)
        return s, V, U
    Q0 = None
    if m > n:
        F = dense.factorize(A, "QR", led)
        Q0 = dense.explicit_q(F, led)
        A = F.triangular
    Z = np.zeros((n, n), dtype=A.dtype)
    H = np.block([[Z, A], [A.conj().T, Z]])
    tree = sym_strategy(H, cfg, led)
    w = tree.eigenvalues().real
    X = tree.accumulated_transform()
    order = np.argsort(-w, kind="stable")[:n]
    s = np.maximum(w[order], 0.0)
    U = math.sqrt(2) * X[:n, order]
    V = math.sqrt(2) * X[n:, order]
    # vectors of zero (or clustered) singular values are only determined as a
    # subspace; re-orthonormalize them
    tol = 64 * n * EPS * max(s[0] if s.size else 0.0, 1e-300)
    good = s > tol
    for M in (U, V):
        nrm = np.linalg.norm(M, axis=0)
        ok = good & (np.abs(nrm - 1) < 1e-6)
        M[:, ok] /= nrm[ok]
    U = dense._complete_columns(U, good & (np.abs(np.linalg.norm(U, axis=0) - 1) < 1e-6))
    V = dense._complete_columns(V, good & (np.abs(np.linalg.norm(V, axis=0) - 1) < 1e-6))
    if Q0 is not None:
        U = Q0 @ U
    return s, U, V


# ----------------------------------------------------------------------------
# pencils: circles of doubly exponential radii

def pencil_strategy(A, B, cfg=None, ledger=None):
    """Eigenvalues of the pencil ``A - lambda B`` by splitting along circles.

    Leaves report eigenvalues of the original pencil (``inf`` for infinite
    ones).  A pencil that cannot be divided and looks singular ends in a leaf
    flagged ``near_singular`` instead of raising.
    """
    ctx = _Context(cfg, ledger)
    A, B = dense.promote(dense.as_dense(A), dense.as_dense(B))
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise dense.DimensionError("A and B must be square and of equal size")
    return _pencil_node(A, B, False, ctx)


def _looks_regular(A, B, ctx):
    n = A.shape[0]
    scale = norms(A, "fro") + norms(B, "fro")
    if scale == 0:
        return False
    for _ in range(3):
        z = complex(np.exp(2j * math.pi * ctx.rng.random()) * 2.0 ** ctx.rng.uniform(-1, 1))
        smin = dense.jacobi_svd(A - z * B)[0][-1]
        if smin > 1e3 * n * EPS * (norms(A, "fro") + abs(z) * norms(B, "fro")):
            return True
    return False


def _report(local, reciprocal):
    """Map eigenvalues of the current pencil back to the original one."""
    local = np.asarray(local, dtype=complex)
    if not reciprocal:
        return local
    out = np.empty_like(local)
    for i, v in enumerate(local):
        out[i] = 0 if np.isinf(v) else (np.inf if v == 0 else 1 / v)
    return out


def _pencil_base(A, B, reciprocal, ctx):
    n = A.shape[0]
    z0 = complex(np.exp(2j * math.pi * ctx.rng.random()))
    M = A - z0 * B
    F = dense.factorize(M, "QR")
    C = dense.trsm(F.triangular, F.apply_qh(B))
    mu = dense.small_eigvals(C) if n > 1 else C.diagonal().astype(complex)
    tiny = 64 * n * EPS * max(norms(C, "fro"), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(np.abs(mu) <= tiny, np.inf, z0 + 1 / np.where(mu == 0, 1, mu))
    lam = _report(lam, reciprocal)
    return SpectralTree("leaf_eigenvalues", n, eigenvalues_=lam.astype(complex),
                        info={"reciprocal": reciprocal, "block": (A, B)})


def _near_singular_leaf(A, B, reciprocal, **info):
    n = A.shape[0]
    enc = Enclosure("disk", (0j, math.inf), n)
    return SpectralTree("leaf_enclosure", n, enclosure=enc,
                        info=dict(info, near_singular=True, reciprocal=reciprocal, block=(A, B)))


def _pencil_node(A, B, reciprocal, ctx, swapped=False):
    cfg = ctx.cfg
    n = A.shape[0]
    if n == 1:
        a, b = A[0, 0], B[0, 0]
        scale = max(abs(a), abs(b))
        if scale == 0:
            return _near_singular_leaf(A, B, reciprocal)
        local = np.inf if abs(b) <= EPS * scale else a / b
        return SpectralTree("leaf_eigenvalues", 1, eigenvalues_=_report([local], reciprocal),
                            info={"reciprocal": reciprocal, "block": (A, B)})
    regular = _looks_regular(A, B, ctx)
    if n <= cfg.base_case_size and regular:
        return _pencil_base(A, B, reciprocal, ctx)

    exp_k = 0           # current rung of the radius ladder
    direction = None    # "up" or "down" once the unit circle was one-sided
    bracket = None      # (r_in, r_out): all eigenvalues have r_in < |lambda| < r_out
    r = 1.0
    failures = attempts = 0
    while attempts < ATTEMPT_CAP:
        attempts += 1
        with ctx.led.in_phase("pencil_split"):
            out = rgnep_step(A, r * B, cfg, ctx.led, ctx.seed())
        if out.success:
            k = out.k
            Ah, Bh = out.A_hat, out.B_hat / r
            # leading block: |lambda| > r; continue it as a reciprocal pencil
            left = _pencil_node(Bh[:k, :k].copy(), Ah[:k, :k].copy(), not reciprocal, ctx)
            right = _pencil_node(Ah[k:, k:].copy(), Bh[k:, k:].copy(), reciprocal, ctx)
            return _split_node(n, out.Q_R, left, right, k=k, radius=r, metric=out.offdiag_metric,
                               left_transform=out.Q_L, reciprocal=reciprocal)
        if out.converged and out.count in (0, n):
            failures = 0
            outside = out.count == n
            if bracket is None and direction in (None, "up" if outside else "down"):
                direction = "up" if outside else "down"
                if exp_k >= LADDER_STEPS:
                    if outside and not swapped:
                        return _pencil_node(B, A, not reciprocal, ctx, swapped=True)
                    # every eigenvalue lies beyond the last rung
                    lam = _report(np.full(n, np.inf if outside else 0.0), reciprocal)
                    return SpectralTree("leaf_eigenvalues", n, eigenvalues_=lam,
                                        info={"reciprocal": reciprocal, "bound": r,
                                              "block": (A, B)})
                r_prev = r
                r = 2.0 ** (2 ** exp_k) if outside else 2.0 ** -(2 ** exp_k)
                exp_k += 1
                continue
            if bracket is None:
                bracket = (r, r_prev) if outside else (r_prev, r)
            else:
                bracket = (r, bracket[1]) if outside else (bracket[0], r)
            if bracket[1] / bracket[0] < 1 + 1e-8:
                enc = Enclosure("disk", (0j, bracket[1]), n)
                return _enclosure_leaf(A, enc, reciprocal=reciprocal, annulus=bracket)
            r = math.sqrt(bracket[0] * bracket[1])
            continue
        failures += 1
        if failures >= cfg.max_failed_splits:
            if not regular:
                return _near_singular_leaf(A, B, reciprocal, attempts=attempts)
            enc = Enclosure("disk", (0j, bracket[1] if bracket else r * 2), n)
            return _enclosure_leaf(A, enc, reciprocal=reciprocal, attempts=attempts)
        r = r * 2.0 ** float(ctx.rng.uniform(-0.5, 0.5))
    if not regular:
        return _near_singular_leaf(A, B, reciprocal, attempts=attempts)
    return _enclosure_leaf(A, Enclosure("disk", (0j, r), n), reciprocal=reciprocal)
