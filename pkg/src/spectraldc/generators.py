"""Test matrices whose spectra are known by construction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dense

KINDS = ("normal_random_spectrum", "near_axis", "jordan_mix", "constructed_sym", "constructed_svd")


@dataclass
class GroundTruth:
    """Matrix plus the spectrum it was built from.

    ``values`` holds eigenvalues, or singular values (descending) for
    ``constructed_svd``.  ``factors`` keeps the orthogonal factors used.
    """

    kind: str
    matrix: np.ndarray
    values: np.ndarray
    params: dict = field(default_factory=dict)
    factors: dict = field(default_factory=dict)

    def axis_distance(self):
        """Distance from the imaginary axis to the nearest eigenvalue."""
        return float(np.min(np.abs(np.real(self.values))))


def _haar(n, rng):
    return dense.haar_orthogonal(n, "real64", rng)


def normal_random_spectrum(n, box=(-1.5, 1.5), seed=None):
    """Normal matrix ``Q diag(lambda) Q^T`` with real and imaginary parts uniform in ``box``."""
    rng = dense.make_rng(seed)
    lo, hi = box
    lam = rng.uniform(lo, hi, n) + 1j * rng.uniform(lo, hi, n)
    Q = _haar(n, rng)
    A = (Q * lam) @ Q.T
    return GroundTruth("normal_random_spectrum", A, lam, {"n": n, "box": tuple(box)}, {"Q": Q})


def near_axis(n, delta, seed=None, span=1.5):
    """Eigenvalues ``+-delta + i y`` with ``y`` uniform in ``[-span, span]``."""
    rng = dense.make_rng(seed)
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    rng.shuffle(signs)
    lam = delta * signs + 1j * rng.uniform(-span, span, n)
    Q = _haar(n, rng)
    A = (Q * lam) @ Q.T
    return GroundTruth("near_axis", A, lam, {"n": n, "delta": delta}, {"Q": Q})


def jordan_mix(n, center, block_size, seed=None, span=1.5):
    """Random eigenvalues in the left half-plane plus one Jordan block at ``center``.

    The block diagonal form is hidden by a random orthogonal similarity.
    """
    if not 1 <= block_size <= n:
        raise ValueError("block_size must lie in [1, n]")
    rng = dense.make_rng(seed)
    m = n - block_size
    free = -rng.uniform(0, span, m) + 1j * rng.uniform(-span, span, m)
    T = np.zeros((n, n), dtype=complex)
    T[np.arange(m), np.arange(m)] = free
    idx = np.arange(m, n)
    T[idx, idx] = center
    T[idx[:-1], idx[1:]] = 1.0
    Q = _haar(n, rng)
    A = Q @ T @ Q.T
    if np.all(np.imag(A) == 0):
        A = A.real
    lam = np.concatenate([free, np.full(block_size, center, dtype=complex)])
    return GroundTruth("jordan_mix", A, lam,
                       {"n": n, "center": center, "block_size": block_size}, {"Q": Q, "T": T})


def constructed_sym(n, seed=None, spectrum=None):
    """Symmetric ``Q diag(lambda) Q^T``; ``lambda`` uniform in ``[-1, 1]`` unless given."""
    rng = dense.make_rng(seed)
    lam = np.sort(rng.uniform(-1, 1, n) if spectrum is None else np.asarray(spectrum, float))
    Q = _haar(n, rng)
    A = (Q * lam) @ Q.T
    A = (A + A.T) / 2
    return GroundTruth("constructed_sym", A, lam, {"n": n}, {"Q": Q})


def constructed_svd(n, seed=None, singular_values=None):
    """``U0 diag(sigma) V0^T`` with ``sigma`` uniform in ``[0.1, 1]`` unless given."""
    rng = dense.make_rng(seed)
    if singular_values is None:
        sig = rng.uniform(0.1, 1.0, n)
    else:
        sig = np.asarray(singular_values, float)
    sig = np.sort(sig)[::-1]
    U0, V0 = _haar(n, rng), _haar(n, rng)
    A = (U0 * sig) @ V0.T
    return GroundTruth("constructed_svd", A, sig, {"n": n}, {"U": U0, "V": V0})


def generate(kind, n, seed=None, **params):
    if kind == "normal_random_spectrum":
        return normal_random_spectrum(n, params.get("box", (-1.5, 1.5)), seed)
    if kind == "near_axis":
        return near_axis(n, params.get("delta", 1e-10), seed)
    if kind == "jordan_mix":
        return jordan_mix(n, params.get("center", 0.1), params.get("block_size", n // 2), seed)
    if kind == "constructed_sym":
        return constructed_sym(n, seed)
    if kind == "constructed_svd":
        return constructed_svd(n, seed)
    raise ValueError(f"unknown generator {kind!r}; expected one of {KINDS}")
