"""Result types of the recursive drivers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry


@dataclass
class Enclosure:
    """Region known to hold ``eig_count`` eigenvalues that could not be split.

    ``data`` is ``(lo, hi)`` for an interval, ``(center, radius)`` for a disk
    and a counter-clockwise vertex list for a convex polygon.
    """

    kind: str
    data: object
    eig_count: int

    def __post_init__(self):
        if self.kind not in ("interval", "disk", "convex_polygon"):
            raise ValueError(f"unknown enclosure kind {self.kind!r}")
        if self.eig_count < 1:
            raise ValueError("an enclosure holds at least one eigenvalue")

    def contains(self, z, slack=0.0):
        if self.kind == "interval":
            lo, hi = self.data
            return abs(complex(z).imag) <= slack and lo - slack <= complex(z).real <= hi + slack
        if self.kind == "disk":
            c, r = self.data
            return abs(z - c) <= r + slack
        return geometry.polygon_contains(self.data, complex(z), slack)

    def representative(self):
        if self.kind == "interval":
            return 0.5 * (self.data[0] + self.data[1])
        if self.kind == "disk":
            return self.data[0]
        return complex(np.mean(self.data))


@dataclass
class SpectralTree:
    """Node of a spectral divide-and-conquer tree.

    A ``split`` node stores the unitary ``transform`` that made its block
    upper triangular (``transform^H A transform``); the leading ``k`` rows and
    columns went to ``left``.  Leaves hold eigenvalues (with local Schur or
    eigen vectors) or an :class:`Enclosure`.
    """

    kind: str
    size: int
    transform: np.ndarray | None = None
    left: "SpectralTree | None" = None
    right: "SpectralTree | None" = None
    eigenvalues_: np.ndarray | None = None
    vectors: np.ndarray | None = None
    enclosure: Enclosure | None = None
    info: dict = field(default_factory=dict)

    @property
    def is_leaf(self):
        return self.kind != "split"

    def leaves(self):
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()

    def splits(self):
        if self.is_leaf:
            return []
        return [self] + self.left.splits() + self.right.splits()

    def eigenvalues(self, include_enclosures=True):
        """Eigenvalues in leaf order; enclosures contribute a representative point."""
        out = []
        for leaf in self.leaves():
            if leaf.kind == "leaf_eigenvalues":
                out.extend(np.asarray(leaf.eigenvalues_).tolist())
            elif include_enclosures:
                out.extend([leaf.enclosure.representative()] * leaf.enclosure.eig_count)
        return np.array(out)

    def leaf_count(self):
        n = 0
        for leaf in self.leaves():
            if leaf.kind == "leaf_eigenvalues":
                n += len(leaf.eigenvalues_)
            else:
                n += leaf.enclosure.eig_count
        return n

    def enclosures(self):
        return [lf.enclosure for lf in self.leaves() if lf.kind == "leaf_enclosure"]

    @property
    def near_singular(self):
        return any(lf.info.get("near_singular", False) for lf in self.leaves())

    def accumulated_transform(self):
        """Product of all split transforms and leaf vectors (an n x n unitary)."""
        if self.is_leaf:
            if self.vectors is not None:
                return self.vectors
            return np.eye(self.size)
        L = self.left.accumulated_transform()
        R = self.right.accumulated_transform()
        k = self.left.size
        dt = np.result_type(L, R, self.transform)
        D = np.zeros((self.size, self.size), dtype=dt)
        D[:k, :k] = L
        D[k:, k:] = R
        return self.transform @ D
