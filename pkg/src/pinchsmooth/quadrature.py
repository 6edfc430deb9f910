"""Deterministic quadrature over the region a smoothing map moves.

The smoothing map differs from the identity only on the union of its
elementary supports, and each elementary map keeps its own support in place.
Integrals of quantities that vanish off that union are therefore sums over
supports, each handled by a composite Gauss rule in the support's natural
coordinates, with every node down-weighted by the number of supports that
contain it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import primitives as pr

__all__ = ["QuadratureRule", "elementary_maps", "support_rule", "union_rule", "support_multiplicity"]


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    cells: np.ndarray | None = None

    @property
    def measure(self):
        return float(self.weights.sum())


def elementary_maps(xi):
    """Flat list of elementary maps, with grouped sector pairs split apart."""
    maps = xi.maps if isinstance(xi.maps, list) else list(xi.maps)
    out = []
    for m in maps:
        out.extend(getattr(m, "members", (m,)))
    return out


def _axis(a, b, panels, order, cuts=()):
    brk = np.union1d(np.linspace(a, b, panels + 1), [c for c in cuts if a < c < b])
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = brk[:-1, None], brk[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    return nodes.ravel(), (0.5 * (hi - lo) * w).ravel()


def _tensor(*axes):
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrid = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    return pts, np.prod(np.column_stack([g.ravel() for g in wgrid]), axis=1)


def _angles_about(frame, cx, refs):
    """Angles (in the frame's cylindrical coordinates) of mesh vertices not in ``refs``."""
    others = [v for v in range(len(cx.vertices)) if v not in refs]
    if not others:
        return []
    _, _, phi = pr.cart_to_cyl(frame.apply(cx.vertices[others]))
    return list(phi)


def _planar_angles(origin, cx, vertex):
    rows = [S for S in cx.faces(1) if vertex in S]
    out = []
    for S in rows:
        other = S[0] if S[1] == vertex else S[1]
        v = cx.vertices[other] - origin
        out.append(math.atan2(v[1], v[0]))
    return out


def _rule_2d(m, cx, panels, order):
    if m.kind == "edge_b":
        d, ell, h = m.d, m.ell, m.d * m.t
        w = _axis(d, ell - d, 2 * panels, order, (2 * d, 3 * d, ell - 3 * d, ell - 2 * d, ell / 2))
        z = _axis(-h, h, panels, order, (0.0,))
        q, wt = _tensor(w, z)
    elif m.kind == "corner_a":
        r = _axis(0.0, 3 * m.d, panels, order, (2 * m.d,))
        a = _axis(-m.alpha / 3, m.alpha / 3, panels, order, (0.0,))
        (rr, pp), wt = _tensor(r, a)[0].T, _tensor(r, a)[1]
        q, wt = np.column_stack([rr * np.cos(pp), rr * np.sin(pp)]), wt * rr
    else:
        rad = m.eta * m.delta
        cuts = [((c + math.pi) % (2 * math.pi)) - math.pi for c in _planar_angles(m.origin, cx, m.vertex)]
        r = _axis(0.0, rad, panels, order)
        a = _axis(-math.pi, math.pi, 2 * panels, order, cuts)
        (rr, pp), wt = _tensor(r, a)[0].T, _tensor(r, a)[1]
        return QuadratureRule(m.origin + np.column_stack([rr * np.cos(pp), rr * np.sin(pp)]), wt * rr)
    return QuadratureRule(m.origin + q @ m.R, wt)


def _cyl_rule(frame, y_ax, r_of, a_ax, r_unit):
    """Cylindrical rule with radius ``r = r_of(y) * u`` for ``u`` in ``r_unit``."""
    (y, u, phi), w = _tensor(y_ax, r_unit, a_ax)[0].T, _tensor(y_ax, r_unit, a_ax)[1]
    scale = r_of(y)
    r = scale * u
    return QuadratureRule(frame.inverse(pr.cyl_to_cart(y, r, phi)), w * r * scale)


def _rule_3d(m, cx, panels, order):
    k = m.kind
    d = m.delta
    if k == "h":
        return _cyl_rule(m.frame, _axis(0.0, d, panels, order, (d / 2,)), lambda y: 3 * y * m.t,
                         _axis(-m.alpha, m.alpha, panels, order, (0.0,)), _axis(0.0, 1.0, panels, order, (2 / 3,)))
    if k == "H":
        cuts = _angles_about(m.frame, cx, m.refs)
        return _cyl_rule(m.frame, _axis(0.0, d, panels, order, (d / 2,)), lambda y: y * m.tau,
                         _axis(-math.pi, math.pi, 2 * panels, order, cuts), _axis(0.0, 1.0, panels, order))
    if k in ("b", "w"):
        tube = m.tube
        y_ax = _axis(d / 4, m.ell - d / 4, 2 * panels, order, (d / 2, m.ell - d / 2, m.ell / 2))
        if k == "b":
            a_ax = _axis(-m.omega, m.omega, panels, order, (0.0,))
            u_ax = _axis(0.0, 1.0, panels, order, (0.5,))
        else:
            a_ax = _axis(-math.pi, math.pi, 2 * panels, order, _angles_about(m.frame, cx, m.refs))
            u_ax = _axis(0.0, 1.0, panels, order)
        return _cyl_rule(m.frame, y_ax, lambda y: np.full_like(y, tube), a_ax, u_ax)
    if k == "G":
        rho = _axis(0.0, d, panels, order)
        mu = _axis(-1.0, 1.0, panels, order)
        th = _axis(-math.pi, math.pi, 2 * panels, order)
        (r, c, p), w = _tensor(rho, mu, th)[0].T, _tensor(rho, mu, th)[1]
        s = np.sqrt(1 - c**2)
        v = np.column_stack([s * np.cos(p), s * np.sin(p), c])
        return QuadratureRule(m.frame.origin + r[:, None] * v, w * r**2)
    if k == "s":
        P = m.bump.corners
        h = m.height
        # collapsed square onto the face triangle, times the normal extent
        u_ax = _axis(0.0, 1.0, 2 * panels, order)
        v_ax = _axis(0.0, 1.0, 2 * panels, order)
        z_ax = _axis(-h, h, panels, order, (0.0,))
        (u, v, z), w = _tensor(u_ax, v_ax, z_ax)[0].T, _tensor(u_ax, v_ax, z_ax)[1]
        q = P[0] + u[:, None] * (P[1] - P[0]) + (u * v)[:, None] * (P[2] - P[1])
        e1, e2 = P[1] - P[0], P[2] - P[1]
        area2 = abs(e1[0] * e2[1] - e1[1] * e2[0])
        return QuadratureRule(m.frame.inverse(np.column_stack([q, z])), w * u * area2)
    raise ValueError(f"no quadrature for map kind {k!r}")


def support_rule(m, cx, panels=6, order=4):
    """Composite Gauss rule covering one elementary support."""
    if cx.dimension == 2:
        return _rule_2d(m, cx, panels, order)
    return _rule_3d(m, cx, panels, order)


def support_multiplicity(maps, x):
    """Number of elementary supports containing each point."""
    x = np.atleast_2d(x)
    count = np.zeros(len(x), int)
    tree = cKDTree(x)
    for m in maps:
        c, rad = m.bounding_ball
        idx = np.asarray(tree.query_ball_point(c, rad * (1 + 1e-9) + 1e-15), dtype=int)
        if len(idx):
            count[idx] += m.support(x[idx])
    return count


def union_rule(xi, panels=None, order=4):
    """Rule for integrals supported on the union of all elementary supports.

    Nodes outside the complex, or on a support boundary, get zero weight.
    Each node also records the simplex containing it.
    """
    if panels is None:
        panels = 6 if xi.complex.dimension == 2 else 2
    maps = elementary_maps(xi)
    rules = [support_rule(m, xi.complex, panels, order) for m in maps]
    pts = np.vstack([r.points for r in rules])
    w = np.concatenate([r.weights for r in rules])
    mult = support_multiplicity(maps, pts)
    keep = mult > 0
    pts, w = pts[keep], w[keep] / mult[keep]
    cell = xi.complex.locate(pts, tol=0.0)
    inside = cell >= 0
    return QuadratureRule(pts[inside], w[inside], cell[inside])
