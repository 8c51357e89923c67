"""Eigenvectors of an upper triangular matrix.

For ``T X = X D`` with ``D = diag(T)`` and unit diagonal in ``X``, entry
``X[i, j]`` (``i < j``) is ``sum_{k > i} T[i, k] X[k, j] / (T[j, j] - T[i, i])``.
The blocked variant sweeps ``b x b`` tiles with ``b = floor(sqrt(M / 3))`` so
that a tile of ``T``, a tile of ``X`` and an accumulator fit in fast memory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dense
from .dense import norms
from .ledger import ensure_ledger

DEFAULT_SEP_TOL = 1e-12


class ClusteredEigenvalueError(ArithmeticError):
    """Two diagonal entries are too close for the substitution formula."""

    def __init__(self, i, j, gap):
        super().__init__(f"diagonal entries {i} and {j} differ by only {gap:.3e}")
        self.pair = (i, j)
        self.gap = gap


@dataclass
class TriangularEigenvectors:
    X: np.ndarray
    D: np.ndarray

    def residual(self, T):
        return norms(T @ self.X - self.X * self.D[np.newaxis, :], "fro")


def separation_condition(T):
    """``max_{i<j} ||T||_F / |T_jj - T_ii|`` (infinite for repeated diagonals)."""
    d = np.diagonal(T)
    n = d.size
    if n < 2:
        return 1.0
    gaps = np.abs(d[:, None] - d[None, :])[np.triu_indices(n, 1)]
    g = gaps.min()
    return np.inf if g == 0 else norms(T, "fro") / g


def check_separated(T, tol=DEFAULT_SEP_TOL):
    d = np.diagonal(T)
    n = d.size
    if n < 2:
        return
    G = np.abs(d[:, None] - d[None, :])
    G[np.tril_indices(n)] = np.inf
    i, j = np.unravel_index(np.argmin(G), G.shape)
    if G[i, j] <= tol * norms(T, "fro"):
        raise ClusteredEigenvalueError(int(i), int(j), float(G[i, j]))


def _validate(T):
    T = dense.as_dense(T)
    n = T.shape[0]
    if T.shape[1] != n:
        raise dense.DimensionError("square matrix required")
    if np.any(np.tril(T, -1) != 0):
        raise ValueError("T must be upper triangular")
    return T


def _normalize(X):
    nrm = np.sqrt((np.abs(X) ** 2).sum(axis=0))
    return X / nrm[np.newaxis, :]


def _diag_block(Tjj):
    """Unit-diagonal eigenvectors of one triangular tile (row recurrence)."""
    m = Tjj.shape[0]
    d = np.diagonal(Tjj)
    X = np.eye(m, dtype=Tjj.dtype)
    for i in range(m - 2, -1, -1):
        X[i, i + 1:] = (Tjj[i, i + 1:] @ X[i + 1:, i + 1:]) / (d[i + 1:] - d[i])
    return X


def trevc_unblocked(T, sep_tol=DEFAULT_SEP_TOL, normalize=True):
    """Reference evaluation of the substitution formula, one row at a time."""
    T = _validate(T)
    check_separated(T, sep_tol)
    X = _diag_block(T)
    D = np.diagonal(T).copy()
    return TriangularEigenvectors(_normalize(X) if normalize else X, D)


def trevc_blocked(T, ledger=None, block=None, sep_tol=DEFAULT_SEP_TOL, normalize=True):
    """Tile-by-tile evaluation with word and message accounting.

    Parameters
    ----------
    T : ndarray
        Upper triangular with pairwise separated diagonal entries.
    ledger : CostLedger, optional
        Supplies the fast-memory size (and thus the tile size) and receives
        the counts.
    block : int, optional
        Override for the tile size.
    """
    T = _validate(T)
    check_separated(T, sep_tol)
    led = ensure_ledger(ledger)
    n = T.shape[0]
    b = block or led.blocksize
    tiles = dense._tiles(n, b)
    nt = len(tiles)
    X = np.zeros_like(T)
    d = np.diagonal(T)
    with led.in_phase("trevc"):
        for jb in range(nt):
            j0, j1 = tiles[jb]
            led.touch(("T", jb, jb), j1 - j0, j1 - j0)
            X[j0:j1, j0:j1] = _diag_block(T[j0:j1, j0:j1])
            led.add_flops((j1 - j0) ** 3 // 3)
            led.record(words=(j1 - j0) ** 2, messages=1)
            dj = d[j0:j1]
            for ib in range(jb - 1, -1, -1):
                i0, i1 = tiles[ib]
                S = np.zeros((i1 - i0, j1 - j0), dtype=T.dtype)
                led.touch(("S", 0), i1 - i0, j1 - j0)
                for kb in range(ib + 1, jb + 1):
                    k0, k1 = tiles[kb]
                    led.touch(("T", ib, kb), i1 - i0, k1 - k0)
                    led.touch(("X", kb, jb), k1 - k0, j1 - j0)
                    led.touch(("S", 0), i1 - i0, j1 - j0)
                    S += T[i0:i1, k0:k1] @ X[k0:k1, j0:j1]
                    led.add_flops(2 * (i1 - i0) * (k1 - k0) * (j1 - j0))
                led.touch(("T", ib, ib), i1 - i0, i1 - i0)
                # (T_ii - d_j) x = -S solved bottom-up within the tile
                Tii = T[i0:i1, i0:i1]
                Xij = np.zeros_like(S)
                for r in range(i1 - i0 - 1, -1, -1):
                    acc = S[r] + Tii[r, r + 1:] @ Xij[r + 1:]
                    Xij[r] = acc / (dj - Tii[r, r])
                led.add_flops((i1 - i0) ** 2 * (j1 - j0))
                X[i0:i1, j0:j1] = Xij
                led.record(words=(i1 - i0) * (j1 - j0), messages=1)
    return TriangularEigenvectors(_normalize(X) if normalize else X, d.copy())


def back_transform(Q, X, ledger=None):
    """Eigenvectors ``Q X`` of ``A = Q T Q^H`` from those of ``T``."""
    Q = np.asarray(Q)
    X = X.X if isinstance(X, TriangularEigenvectors) else np.asarray(X)
    if Q.shape[1] != X.shape[0]:
        raise dense.DimensionError("Q and X are not conformal")
    Q, X = dense.promote(Q, X)
    return dense.matmul(Q, X, ledger)
