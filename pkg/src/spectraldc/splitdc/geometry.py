"""Planar helpers for the nonsymmetric strategy: lines, cuts and regions.

Points in the plane are complex numbers.  A half-plane is stored as
``(u, h)`` with ``u`` a unit complex normal; it holds the points ``z``
with ``Re(conj(u) z) >= h``.
"""
from __future__ import annotations

import cmath
import math

import numpy as np


def halfplane_for_line(theta, offset, center, radius, keep_greater):
    """Half-plane bounded by ``Re(exp(-i theta) (z - center)) / radius = offset``."""
    u = cmath.exp(1j * theta)
    h = offset * radius + (np.conj(u) * center).real
    if keep_greater:
        return u, float(h)
    return -u, float(-h)


def random_line(rng):
    """Angle uniform in ``[0, 2 pi)`` and offset uniform in ``[-1/2, 1/2]`` (disk units)."""
    theta = float(rng.uniform(0, 2 * math.pi))
    return theta, float(rng.uniform(-0.5, 0.5))


def line_distance(z, theta, offset, center, radius):
    """Euclidean distance from ``z`` to the line of :func:`halfplane_for_line`."""
    w = np.exp(-1j * theta) * (np.asarray(z) - center)
    return np.abs(w.real - offset * radius)


def in_halfplane(z, hp, slack=0.0):
    u, h = hp
    return (np.conj(u) * z).real >= h - slack


def disk_polygon(center, radius, sides=64):
    """Regular polygon circumscribing the disk (so it contains the disk)."""
    r = radius / math.cos(math.pi / sides)
    k = np.arange(sides)
    return list(center + r * np.exp(2j * np.pi * (k + 0.5) / sides))


def clip(poly, hp):
    """Intersect a convex polygon with a half-plane (Sutherland-Hodgman)."""
    if not poly:
        return []
    u, h = hp
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        fp = (np.conj(u) * p).real - h
        fq = (np.conj(u) * q).real - h
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            t = fp / (fp - fq)
            out.append(p + t * (q - p))
    return out


def region_polygon(center, radius, halfplanes, sides=64):
    poly = disk_polygon(center, radius, sides)
    for hp in halfplanes:
        poly = clip(poly, hp)
    return poly


def polygon_contains(poly, z, slack=0.0):
    """Point-in-convex-polygon test for counter-clockwise vertex lists."""
    m = len(poly)
    if m == 0:
        return False
    if m < 3:
        return min(abs(z - p) for p in poly) <= slack
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        e = q - p
        cross = (e.real * (z - p).imag - e.imag * (z - p).real)
        if cross < -slack * abs(e):
            return False
    return True


def _circle_two(a, b):
    c = (a + b) / 2
    return c, abs(a - c)


def _circle_three(a, b, c):
    ax, ay, bx, by, cx, cy = a.real, a.imag, b.real, b.imag, c.real, c.imag
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-300:
        pts = [a, b, c]
        best = max(((p, q) for p in pts for q in pts), key=lambda pq: abs(pq[0] - pq[1]))
        return _circle_two(*best)
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    ctr = complex(ux, uy)
    return ctr, abs(a - ctr)


def min_enclosing_circle(points, rng=None):
    """Smallest circle containing the points (randomized incremental method)."""
    pts = [complex(p) for p in points]
    if not pts:
        raise ValueError("no points")
    if rng is not None:
        rng.shuffle(pts)

    def inside(c, p):
        return abs(p - c[0]) <= c[1] * (1 + 1e-12) + 1e-300

    circ = (pts[0], 0.0)
    for i, p in enumerate(pts):
        if inside(circ, p):
            continue
        circ = (p, 0.0)
        for j in range(i):
            q = pts[j]
            if inside(circ, q):
                continue
            circ = _circle_two(p, q)
            for k in range(j):
                s = pts[k]
                if not inside(circ, s):
                    circ = _circle_three(p, q, s)
    return circ
