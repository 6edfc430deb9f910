"""Small exact-distance helpers for points, segments and triangles in 2D/3D."""
from __future__ import annotations

import numpy as np


def unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero-length vector")
    return v / n


def angle_between(u, v):
    u = unit(u)
    v = unit(v)
    return float(np.arctan2(np.linalg.norm(np.cross(u, v)) if u.size == 3 else abs(u[0] * v[1] - u[1] * v[0]), np.dot(u, v)))


def point_segment_distance(p, a, b):
    p, a, b = (np.asarray(x, float) for x in (p, a, b))
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def segment_segment_distance(p1, q1, p2, q2):
    """Closest distance between segments ``[p1,q1]`` and ``[p2,q2]``."""
    p1, q1, p2, q2 = (np.asarray(x, float) for x in (p1, q1, p2, q2))
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    c, b = d1 @ r, d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-14 * a * e else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    cands = [np.linalg.norm((p1 + s * d1) - (p2 + t * d2))]
    # endpoint fallbacks guard against the near-parallel branch
    for p in (p1, q1):
        cands.append(point_segment_distance(p, p2, q2))
    for p in (p2, q2):
        cands.append(point_segment_distance(p, p1, q1))
    return float(min(cands))


def closest_point_triangle(p, a, b, c):
    """Closest point of triangle ``abc`` to ``p`` (region-based, 3D)."""
    p, a, b, c = (np.asarray(x, float) for x in (p, a, b, c))
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return a
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        return a + d1 / (d1 - d3) * ab
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        return a + d2 / (d2 - d6) * ac
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b)
    denom = 1.0 / (va + vb + vc)
    return a + ab * (vb * denom) + ac * (vc * denom)


def point_triangle_distance(p, a, b, c):
    return float(np.linalg.norm(np.asarray(p, float) - closest_point_triangle(p, a, b, c)))


def segment_crosses_triangle(p, q, a, b, c, tol=1e-12):
    p, q, a, b, c = (np.asarray(x, float) for x in (p, q, a, b, c))
    n = np.cross(b - a, c - a)
    dp, dq = n @ (p - a), n @ (q - a)
    if dp * dq > 0 or dp == dq:
        return False
    x = p + dp / (dp - dq) * (q - p)
    for u, v in ((a, b), (b, c), (c, a)):
        if np.cross(v - u, x - u) @ n < -tol * (n @ n):
            return False
    return True


def triangle_triangle_distance(t1, t2):
    """Distance between two triangles given as ``(3, 3)`` vertex arrays."""
    t1 = np.asarray(t1, float)
    t2 = np.asarray(t2, float)
    for (P, Q) in ((t1, t2), (t2, t1)):
        for i in range(3):
            if segment_crosses_triangle(P[i], P[(i + 1) % 3], *Q):
                return 0.0
    best = np.inf
    for P, Q in ((t1, t2), (t2, t1)):
        for v in P:
            best = min(best, point_triangle_distance(v, *Q))
    for i in range(3):
        for j in range(3):
            best = min(best, segment_segment_distance(t1[i], t1[(i + 1) % 3], t2[j], t2[(j + 1) % 3]))
    return float(best)


def simplex_volume(P):
    """Unsigned n-volume of the simplex with vertex rows ``P`` (shape ``(n+1, n)``)."""
    P = np.asarray(P, float)
    n = P.shape[1]
    return abs(np.linalg.det((P[1:] - P[0]).T)) / float(np.prod(np.arange(1, n + 1)))


def barycentric(P, x):
    """Barycentric coordinates of points ``x`` (``(m, n)``) in simplex ``P``."""
    P = np.asarray(P, float)
    x = np.atleast_2d(np.asarray(x, float))
    E = (P[1:] - P[0]).T
    lam = np.linalg.solve(E, (x - P[0]).T).T
    return np.column_stack([1.0 - lam.sum(axis=1), lam])


def incenter_inradius(P):
    """Incenter and inradius of a simplex (facet-area weighted vertex average)."""
    P = np.asarray(P, float)
    n = P.shape[1]
    w = np.empty(n + 1)
    for i in range(n + 1):
        facet = np.delete(P, i, axis=0)
        w[i] = _facet_measure(facet)
    vol = simplex_volume(P)
    center = (w[:, None] * P).sum(axis=0) / w.sum()
    return center, n * vol / w.sum()


def _facet_measure(F):
    E = F[1:] - F[0]
    k = E.shape[0]
    return np.sqrt(max(np.linalg.det(E @ E.T), 0.0)) / float(np.prod(np.arange(1, k + 1)))


def segment_triangle_distance(p, q, tri):
    tri = np.asarray(tri, float)
    if segment_crosses_triangle(p, q, *tri):
        return 0.0
    best = min(point_triangle_distance(p, *tri), point_triangle_distance(q, *tri))
    for j in range(3):
        best = min(best, segment_segment_distance(p, q, tri[j], tri[(j + 1) % 3]))
    return float(best)
