"""Planar smoothing homeomorphism built from edge, corner and vertex pinches.

Every elementary map is the identity off an explicit support region and
returns its input untouched there.  Jacobians are analytic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import primitives as pr
from ._staging import apply_stage
from .complex_core import (
    GeometryConstants2D,
    SimplicialComplex,
    compute_geometry_constants,
    delta_caps,
)

__all__ = [
    "ElementaryPinchMap2D",
    "SmoothingMap2D",
    "DisjointnessError",
    "build_edge_pinch",
    "build_corner_pinch",
    "build_vertex_pinch",
    "build_xi_2d",
]

KINDS = ("edge_b", "corner_a", "vertex_e")


class DisjointnessError(RuntimeError):
    pass


def _rot(u):
    return np.array([u, [-u[1], u[0]]])


@dataclass(frozen=True)
class ElementaryPinchMap2D:
    kind: str
    edge: tuple | None
    vertex: int | None
    origin: np.ndarray
    u: np.ndarray
    ell: float
    delta: float
    d: float
    t: float
    alpha: float
    eta: float

    @property
    def n(self):
        return np.array([-self.u[1], self.u[0]])

    @property
    def R(self):
        return _rot(self.u)

    @property
    def bounding_ball(self):
        if self.kind == "edge_b":
            mid = self.origin + 0.5 * self.ell * self.u
            return mid, math.hypot(0.5 * self.ell, self.d * self.t)
        if self.kind == "corner_a":
            return self.origin, 3.0 * self.d
        return self.origin, self.eta * self.delta

    def _local(self, x):
        p = (np.atleast_2d(np.asarray(x, float)) - self.origin) @ self.R.T
        return p[:, 0], p[:, 1]

    def support(self, x):
        """Boolean mask of points the map may move (an open set)."""
        w, z = self._local(x)
        if self.kind == "edge_b":
            wm = np.minimum(w, self.ell - w)
            return (wm > self.d) & (np.abs(z) < self.d * self.t)
        r = np.hypot(w, z)
        if self.kind == "corner_a":
            phi = np.arctan2(z, w)
            return (r > 0) & (r < 3 * self.d) & (np.abs(phi) < self.alpha / 3)
        return r < self.eta * self.delta

    def apply(self, x):
        """Return images and Jacobians (shapes ``(m, 2)`` and ``(m, 2, 2)``)."""
        x = np.atleast_2d(np.asarray(x, float))
        y = x.copy()
        J = np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()
        m = self.support(x)
        if self.kind == "vertex_e":
            # the centre itself is excluded from the open support test below
            m_centre = np.all(x == self.origin, axis=1)
            J[m_centre] = 0.0
            m &= ~m_centre
        if not np.any(m):
            return y, J
        ym, Jm = getattr(self, "_apply_" + self.kind)(x[m])
        y[m] = ym
        J[m] = Jm
        return y, J

    def __call__(self, x):
        return self.apply(x)[0]

    def _apply_edge_b(self, x):
        w, z = self._local(x)
        far = w > 0.5 * self.ell
        wm = np.where(far, self.ell - w, w)
        sgn = np.where(far, -1.0, 1.0)
        d, dt = self.d, self.d * self.t
        c = pr.ramp_eval(d, 2 * d, wm)
        dc = pr.ramp_deriv(d, 2 * d, wm) * sgn
        gz = pr.g_eval(dt, z)
        z2 = c * gz + (1 - c) * z
        L = np.zeros((len(w), 2, 2))
        L[:, 0, 0] = 1.0
        L[:, 1, 0] = dc * (gz - z)
        L[:, 1, 1] = c * pr.g_deriv(dt, z) + (1 - c)
        R = self.R
        y = self.origin + np.column_stack([w, z2]) @ R
        return y, R.T @ L @ R

    def _apply_corner_a(self, x):
        w, z = self._local(x)
        r = np.hypot(w, z)
        phi = np.arctan2(z, w)
        d, half = self.d, self.alpha / 3
        c = pr.ramp_eval(2 * d, 3 * d, r)
        gphi = pr.g_eval(half, phi)
        phi2 = (1 - c) * gphi + c * phi
        dphi_dr = pr.ramp_deriv(2 * d, 3 * d, r) * (phi - gphi)
        dphi_dphi = (1 - c) * pr.g_deriv(half, phi) + c
        co, si = np.cos(phi), np.sin(phi)
        co2, si2 = np.cos(phi2), np.sin(phi2)
        # d(cart)/d(polar) at the image times polar chain times d(polar)/d(cart)
        P2 = np.stack([np.stack([co2, -r * si2], -1), np.stack([si2, r * co2], -1)], -2)
        M = np.zeros((len(r), 2, 2))
        M[:, 0, 0] = 1.0
        M[:, 1, 0] = dphi_dr
        M[:, 1, 1] = dphi_dphi
        Pinv = np.stack([np.stack([co, si], -1), np.stack([-si / r, co / r], -1)], -2)
        L = P2 @ M @ Pinv
        R = self.R
        y = self.origin + np.column_stack([r * co2, r * si2]) @ R
        return y, R.T @ L @ R

    def _apply_vertex_e(self, x):
        v = x - self.origin
        rho = np.linalg.norm(v, axis=1)
        rad = self.eta * self.delta
        g = pr.g_eval(rad, rho)
        dg = pr.g_deriv(rad, rho)
        e = v / rho[:, None]
        ratio = g / rho
        P = e[:, :, None] * e[:, None, :]
        J = dg[:, None, None] * P + ratio[:, None, None] * (np.eye(2) - P)
        return self.origin + e * g[:, None], J

    def sample_support(self, rng, n):
        """Uniform-in-parameters samples of the support region."""
        if self.kind == "edge_b":
            wm = rng.uniform(self.d, 0.5 * self.ell, n)
            w = np.where(rng.random(n) < 0.5, wm, self.ell - wm)
            z = rng.uniform(-1, 1, n) * self.d * self.t
        elif self.kind == "corner_a":
            r = 3 * self.d * np.sqrt(rng.random(n))
            phi = rng.uniform(-1, 1, n) * self.alpha / 3
            w, z = r * np.cos(phi), r * np.sin(phi)
        else:
            r = self.eta * self.delta * np.sqrt(rng.random(n))
            phi = rng.uniform(-np.pi, np.pi, n)
            return self.origin + np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        pts = self.origin + np.column_stack([w, z]) @ self.R
        return pts[self.support(pts)]

    def support_area(self):
        if self.kind == "edge_b":
            return 2 * self.d * self.t * (self.ell - 2 * self.d)
        if self.kind == "corner_a":
            return (3 * self.d) ** 2 * self.alpha / 3
        return math.pi * (self.eta * self.delta) ** 2


def _edge_data(cx, S, s):
    S = tuple(sorted(int(v) for v in S))
    if s not in S:
        raise ValueError(f"vertex {s} is not an endpoint of side {S}")
    other = S[1] if S[0] == s else S[0]
    V = cx.vertices
    vec = V[other] - V[s]
    ell = float(np.linalg.norm(vec))
    return S, V[s].copy(), vec / ell, ell


def build_edge_pinch(cx: SimplicialComplex, S, delta, consts: GeometryConstants2D):
    S, origin, u, ell = _edge_data(cx, S, min(S))
    d, t = consts.d(S), consts.t(S)
    if not 2 * d < 0.5 * ell:
        raise ValueError(f"delta={delta} too large for side {S}: need 2d < l/2 (d={d:.4g}, l={ell:.4g})")
    return ElementaryPinchMap2D("edge_b", S, None, origin, u, ell, float(delta), d, t,
                                consts.alpha_S[S], consts.eta[S[0]])


def build_corner_pinch(cx: SimplicialComplex, s, S, delta, consts: GeometryConstants2D):
    S, origin, u, ell = _edge_data(cx, S, int(s))
    return ElementaryPinchMap2D("corner_a", S, int(s), origin, u, ell, float(delta), consts.d(S),
                                consts.t(S), consts.alpha_S[S], consts.eta[int(s)])


def build_vertex_pinch(cx: SimplicialComplex, s, delta, consts: GeometryConstants2D):
    s = int(s)
    return ElementaryPinchMap2D("vertex_e", None, s, cx.vertices[s].copy(), np.array([1.0, 0.0]),
                                0.0, float(delta), 0.0, 0.0, 0.0, consts.eta[s])


@dataclass
class SmoothingMap2D:
    """Composition e∘a∘b; each stage composes one family of elementary maps."""

    complex: SimplicialComplex
    delta: float
    constants: GeometryConstants2D
    maps: list
    certificate: dict = field(default_factory=dict)

    @property
    def dimension(self):
        return 2

    def stages(self):
        return [[m for m in self.maps if m.kind == k] for k in KINDS]

    def apply(self, x, return_moved=False):
        """Images, Jacobians and (optionally) the mask of points inside some support."""
        x = np.atleast_2d(np.asarray(x, float))
        J = np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()
        moved = np.zeros(len(x), bool)
        y = x
        for stage in self.stages():
            y, J = apply_stage(stage, y, J, moved)
        return (y, J, moved) if return_moved else (y, J)

    def __call__(self, x):
        return self.apply(x)[0]

    def jacobian(self, x):
        return self.apply(x)[1]

    def stage_order_gap(self, n=10_000, seed=0):
        """Max discrepancy between forward and reversed order inside each stage."""
        rng = np.random.default_rng(seed)
        lo, hi = self.complex.vertices.min(0), self.complex.vertices.max(0)
        x = lo + (hi - lo) * rng.random((n, 2))
        # bias half the samples into supports where the order could matter
        extra = [m.sample_support(rng, max(1, n // (2 * len(self.maps)))) for m in self.maps]
        x = np.vstack([x] + extra)
        gap = 0.0
        I = np.broadcast_to(np.eye(2), (len(x), 2, 2))
        for stage in self.stages():
            a, _ = apply_stage(stage, x, I)
            b, _ = apply_stage(stage, x, I, reverse=True)
            gap = max(gap, float(np.max(np.abs(a - b), initial=0.0)))
        return gap


def _certify(maps, n_samples, seed):
    """Sample each support and check every same-family map is inactive there."""
    rng = np.random.default_rng(seed)
    pairs = 0
    worst = None
    for m1, m2 in itertools.permutations(maps, 2):
        if m1.kind != m2.kind:
            continue
        c1, r1 = m1.bounding_ball
        c2, r2 = m2.bounding_ball
        if np.linalg.norm(c1 - c2) > r1 + r2:
            continue
        pairs += 1
        pts = m1.sample_support(rng, n_samples)
        bad = int(np.count_nonzero(m2.support(pts)))
        if bad:
            worst = (m1, m2, bad)
            break
    return {"pairs_checked": pairs, "violations": 0 if worst is None else worst[2],
            "offending": None if worst is None else (
                (worst[0].kind, worst[0].edge, worst[0].vertex), (worst[1].kind, worst[1].edge, worst[1].vertex))}


def build_xi_2d(cx: SimplicialComplex, delta, consts=None, *, certify=True, n_samples=1000, seed=0):
    """Assemble the planar smoothing map at width ``delta``."""
    if cx.dimension != 2:
        raise ValueError("build_xi_2d needs a planar complex")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if consts is None:
        consts = compute_geometry_constants(cx, delta)
    elif consts.delta != delta:
        consts = compute_geometry_constants(cx, delta)
    cap = delta_caps(cx, consts)
    if delta > cap:
        raise ValueError(f"delta={delta} exceeds the admissible cap {cap:.4g} for this mesh")
    maps = [build_edge_pinch(cx, S, delta, consts) for S in cx.faces(1)]
    maps += [build_corner_pinch(cx, s, S, delta, consts) for S in cx.faces(1) for s in S]
    maps += [build_vertex_pinch(cx, s, delta, consts) for s in range(len(cx.vertices))]
    xi = SmoothingMap2D(cx, float(delta), consts, maps)
    if certify:
        cert = _certify(maps, n_samples, seed)
        if cert["violations"]:
            raise DisjointnessError(f"overlapping supports {cert['offending']}")
        xi.certificate = cert
    return xi
