"""Spatial smoothing homeomorphism: six families of pinch maps and their supports.

Stage order is h (face sectors at a vertex), H (cones around sides at a
vertex), G (radial at a vertex), b (face sectors along a side), w (radial
around a side), s (normal squeeze across a face).  Inside a stage the
non-identity regions are pairwise disjoint; this is certified by sampling
before a map is returned.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import primitives as pr
from ._staging import apply_stage
from .complex_core import (
    Frame,
    GeometryConstants3D,
    SimplicialComplex,
    compute_geometry_constants,
    delta_caps,
    e_cone_angle,
    e_cone_reach,
    edge_frame,
    h_slope,
    local_frame,
)

__all__ = [
    "SupportSet",
    "FaceBump",
    "ElementaryPinchMap3D",
    "SmoothingMap3D",
    "DisjointnessError",
    "PreconditionError",
    "support_membership",
    "disjointness_check",
    "containment_check",
    "build_face_bump",
    "build_map_h",
    "build_map_H",
    "build_map_G",
    "build_map_b",
    "build_map_w",
    "build_map_s",
    "derive_deltas",
    "build_xi_3d",
]

STAGES = ("h", "H", "G", "b", "w", "s")


class DisjointnessError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


def _cyl(frame, x):
    p = frame.apply(np.atleast_2d(np.asarray(x, float)))
    y, r, phi = pr.cart_to_cyl(p)
    # radii this small are on the axis for every purpose (1/r would overflow)
    tiny = r < 1e-200
    if np.any(tiny):
        r = np.where(tiny, 0.0, r)
        phi = np.where(tiny, 0.0, phi)
    return p, y, r, phi


def _cyl_inverse_jacobian(r, phi):
    c, s = np.cos(phi), np.sin(phi)
    Ji = np.zeros(r.shape + (3, 3))
    Ji[..., 0, 0] = 1.0
    Ji[..., 1, 1] = c
    Ji[..., 1, 2] = s
    Ji[..., 2, 1] = -s / r
    Ji[..., 2, 2] = c / r
    return Ji


def _sides(F):
    return [tuple(sorted(p)) for p in itertools.combinations(F, 2)]


# -- face bump ---------------------------------------------------------------
@dataclass(frozen=True)
class FaceBump:
    """C1 cutoff on a face: 0 near its sides, 1 well inside, constant across it."""

    face: tuple
    delta: float
    t: float
    frame: Frame
    corners: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    @property
    def inner(self):
        return self.t * self.delta / 32

    @property
    def outer(self):
        return self.t * self.delta / 16

    def side_distances(self, x):
        q = self.frame.apply(np.atleast_2d(np.asarray(x, float)))[:, :2]
        return q @ self.normals.T - self.offsets

    def __call__(self, x):
        return self.value_and_gradient(x)[0]

    def value_and_gradient(self, x):
        """Value and world-space gradient."""
        dist = self.side_distances(x)
        c = pr.ramp_eval(self.inner, self.outer, dist)
        dc = pr.ramp_deriv(self.inner, self.outer, dist)
        lam = np.prod(c, axis=1)
        g2 = np.zeros((len(dist), 2))
        for k in range(3):
            others = np.prod(np.delete(c, k, axis=1), axis=1)
            g2 += (dc[:, k] * others)[:, None] * self.normals[k]
        grad = np.column_stack([g2, np.zeros(len(dist))]) @ self.frame.R
        return lam, grad


def build_face_bump(cx: SimplicialComplex, F, delta, consts: GeometryConstants3D):
    F = tuple(sorted(int(v) for v in F))
    if not 2 * delta < consts.d_F[F]:
        raise PreconditionError(f"face bump on {F}: need 2*delta < d_F ({delta:.4g} vs {consts.d_F[F]:.4g})")
    S = F[:2]
    frame = local_frame(cx, F, S, F[0])
    P = frame.apply(cx.vertices[list(F)])[:, :2]
    normals, offsets = [], []
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        e = P[j] - P[i]
        nu = np.array([-e[1], e[0]]) / np.linalg.norm(e)
        if (P[k] - P[i]) @ nu < 0:
            nu = -nu
        normals.append(nu)
        offsets.append(P[i] @ nu)
    t = math.tan(consts.omega_F[F] / 3)
    return FaceBump(F, float(delta), t, frame, P, np.array(normals), np.array(offsets))


# -- support sets ------------------------------------------------------------
@dataclass(frozen=True)
class SupportSet:
    """One of the sets E, L, D, W, K in frame coordinates.

    ``omega`` is the angular half-width (E, D), ``slope`` the radial factor:
    r <= y*slope for the cones E and L, r <= slope for the tubes D and W.
    K carries its face bump instead.
    """

    kind: str
    refs: tuple
    frame: Frame
    delta: float
    omega: float = math.pi
    slope: float = 0.0
    ell: float = 0.0
    bump: FaceBump | None = None
    t: float = 0.0
    reach: float = math.inf

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        if self.kind in ("K", "Ks"):
            lam = self.bump(x)
            p3 = self.frame.apply(x)[:, 2]
            return (lam > 0) & (np.abs(p3) < self._height(lam))
        _, y, r, phi = _cyl(self.frame, x)
        ang = np.abs(phi) <= self.omega
        if self.kind == "E":
            cone = (y >= 0) & (y <= self.delta) & (r <= y * self.slope) & ang
            return cone & (y * y + r * r <= self.reach**2)
        if self.kind == "L":
            return (y > 0) & (y < self.delta) & (r > 0) & (r < y * self.slope)
        band = (y >= self.delta / 4) & (y <= self.ell - self.delta / 4) & (r <= self.slope)
        return band & ang if self.kind == "D" else band

    def _height(self, lam):
        # "K" is the literal collar, "Ks" the collar where the face squeeze acts
        if self.kind == "K":
            return 0.5 * self.delta * self.t * lam
        return np.where(lam > 0, self.delta * self.t**2 / 64, 0.0)

    def sample(self, rng, n):
        """Points drawn from the interior of the set (not uniform in volume)."""
        if self.kind in ("K", "Ks"):
            b = self.bump
            w = rng.dirichlet(np.ones(3), n)
            q = w @ b.corners
            lam = b(b.frame.inverse(np.column_stack([q, np.zeros(n)])))
            p3 = rng.uniform(-1, 1, n) * self._height(lam)
            pts = self.frame.inverse(np.column_stack([q, p3]))
            return pts[self.contains(pts)]
        u = rng.random((n, 3))
        if self.kind in ("E", "L"):
            y = self.delta * u[:, 0]
            r = y * self.slope * u[:, 1]
        else:
            y = self.delta / 4 + (self.ell - self.delta / 2) * u[:, 0]
            r = self.slope * u[:, 1]
        half = min(self.omega, math.pi)
        phi = (2 * u[:, 2] - 1) * half
        pts = self.frame.inverse(pr.cyl_to_cart(y, r, phi))
        return pts[self.contains(pts)]


def support_membership(S: SupportSet, x):
    return S.contains(x)


def make_E(cx, consts, F, S, A, delta):
    fr = local_frame(cx, F, S, A)
    theta = consts.theta_FA[(F, A)]
    slope = math.tan(e_cone_angle(theta))
    # the literal cone is very wide for near-right face angles; cap it by the
    # ball that holds the face-sector pinch
    reach = e_cone_reach(theta, delta)
    return SupportSet("E", (F, S, A), fr, float(delta), omega=consts.alpha_A[A], slope=slope, reach=reach)


def make_L(cx, consts, S, A, delta):
    fr = edge_frame(cx, S, A)
    return SupportSet("L", (S, A), fr, float(delta), slope=math.tan(consts.theta_A[A] / 3))


def make_D(cx, consts, F, S, delta):
    fr = local_frame(cx, F, S, S[0])
    slope = 0.25 * delta * math.tan(consts.theta_S[S] / 3)
    return SupportSet("D", (F, S), fr, float(delta), omega=consts.omega_S[S] / 3, slope=slope,
                      ell=consts.ell_S[S])


def make_W(cx, consts, S, delta):
    fr = edge_frame(cx, S, S[0])
    slope = 0.25 * delta * math.tan(consts.theta_S[S] / 3)
    return SupportSet("W", (S,), fr, float(delta), slope=slope, ell=consts.ell_S[S])


def make_K(cx, consts, F, delta, kind="K"):
    bump = build_face_bump(cx, F, delta, consts)
    return SupportSet(kind, (F,), bump.frame, float(delta), bump=bump, t=bump.t)


# -- elementary maps ---------------------------------------------------------
@dataclass(frozen=True)
class ElementaryPinchMap3D:
    """Base class; subclasses supply the support test and the local formula."""

    kind = "?"
    refs: tuple
    frame: Frame
    delta: float

    @property
    def bounding_ball(self):
        raise NotImplementedError

    def support(self, x):
        raise NotImplementedError

    def _local(self, p, mask_centre=None):
        raise NotImplementedError

    def apply(self, x):
        """Images ``(m, 3)`` and Jacobians ``(m, 3, 3)``; identity off support."""
        x = np.atleast_2d(np.asarray(x, float))
        y = x.copy()
        J = np.broadcast_to(np.eye(3), (len(x), 3, 3)).copy()
        m = self.support(x)
        if np.any(m):
            ym, Jm = self._apply_inside(x[m])
            y[m] = ym
            J[m] = Jm
        self._patch_singular(x, ~m, J)
        return y, J

    def _patch_singular(self, x, outside, J):
        """Continuous-extension Jacobian on the singular set, where defined."""

    def __call__(self, x):
        return self.apply(x)[0]

    def _apply_inside(self, x):
        raise NotImplementedError

    def sample_support(self, rng, n):
        raise NotImplementedError


class _CylMap(ElementaryPinchMap3D):
    """Map acting in the cylindrical coordinates of its frame."""

    def _cyl_formula(self, y, r, phi):
        """Return new ``(y, r, phi)`` and the 3x3 Jacobian w.r.t. ``(y, r, phi)``."""
        raise NotImplementedError

    def _apply_inside(self, x):
        p, y, r, phi = _cyl(self.frame, x)
        (y2, r2, phi2), M = self._cyl_formula(y, r, phi)
        L = pr.cyl_jacobian(r2, phi2) @ M @ _cyl_inverse_jacobian(r, phi)
        R = self.frame.R
        return self.frame.inverse(pr.cyl_to_cart(y2, r2, phi2)), R.T @ L @ R


def _angular_M(n, dy, dr, dphi):
    M = np.zeros((n, 3, 3))
    M[:, 0, 0] = 1.0
    M[:, 1, 1] = 1.0
    M[:, 2, 0] = dy
    M[:, 2, 1] = dr
    M[:, 2, 2] = dphi
    return M


def _radial_M(n, dy, dr):
    M = np.zeros((n, 3, 3))
    M[:, 0, 0] = 1.0
    M[:, 1, 0] = dy
    M[:, 1, 1] = dr
    M[:, 2, 2] = 1.0
    return M


@dataclass(frozen=True)
class HMapFaceSector(_CylMap):
    """Rotational pinch toward a face near a vertex, inside a sector around one side."""

    kind = "h"
    alpha: float = 0.0
    t: float = 0.0

    @property
    def bounding_ball(self):
        return self.frame.origin, self.delta * math.sqrt(1 + 9 * self.t**2)

    def support(self, x):
        _, y, r, phi = _cyl(self.frame, x)
        return (y > 0) & (y < self.delta) & (r > 0) & (r < 3 * y * self.t) & (np.abs(phi) < self.alpha)

    def _cyl_formula(self, y, r, phi):
        d, t, a = self.delta, self.t, self.alpha
        cy = pr.ramp_eval(d / 2, d, y)
        cy_y = pr.ramp_deriv(d / 2, d, y)
        lo, hi = 2 * y * t, 3 * y * t
        cr = pr.ramp_eval(lo, hi, r)
        cr_r = pr.ramp_deriv(lo, hi, r)
        cr_y = -cr_r * r / y
        g = pr.g_eval(a, phi)
        gp = pr.g_deriv(a, phi)
        mix = (1 - cr) * g + cr * phi
        phi2 = (1 - cy) * mix + cy * phi
        dy = cy_y * (phi - mix) + (1 - cy) * cr_y * (phi - g)
        dr = (1 - cy) * cr_r * (phi - g)
        dphi = (1 - cy) * ((1 - cr) * gp + cr) + cy
        return (y, r, phi2), _angular_M(len(y), dy, dr, dphi)

    def sample_support(self, rng, n):
        u = rng.random((n, 3))
        y = self.delta * u[:, 0]
        r = 3 * y * self.t * u[:, 1]
        phi = (2 * u[:, 2] - 1) * self.alpha
        pts = self.frame.inverse(pr.cyl_to_cart(y, r, phi))
        return pts[self.support(pts)]


@dataclass(frozen=True)
class HMapSideCone(_CylMap):
    """Radial pinch toward a side inside a cone at one of its endpoints."""

    kind = "H"
    tau: float = 0.0

    @property
    def bounding_ball(self):
        return self.frame.origin, self.delta * math.sqrt(1 + self.tau**2)

    def support(self, x):
        _, y, r, _ = _cyl(self.frame, x)
        return (y > 0) & (y < self.delta) & (r > 0) & (r < y * self.tau)

    def _cyl_formula(self, y, r, phi):
        d, tau = self.delta, self.tau
        cy = pr.ramp_eval(d / 2, d, y)
        cy_y = pr.ramp_deriv(d / 2, d, y)
        wdt = y * tau
        g = pr.g_eval(wdt, r)
        gp = pr.g_deriv(wdt, r)
        g_w = -2 * r**2 / wdt**2 + 2 * r**3 / wdt**3
        r2 = (1 - cy) * g + cy * r
        dy = cy_y * (r - g) + (1 - cy) * tau * g_w
        dr = (1 - cy) * gp + cy
        return (y, r2, phi), _radial_M(len(y), dy, dr)

    def _patch_singular(self, x, outside, J):
        if not np.any(outside):
            return
        _, y, r, _ = _cyl(self.frame, x[outside])
        on_axis = (r == 0) & (y > 0) & (y < self.delta)
        if np.any(on_axis):
            k = pr.ramp_eval(self.delta / 2, self.delta, y[on_axis])
            idx = np.flatnonzero(outside)[on_axis]
            R = self.frame.R
            D = np.zeros((len(k), 3, 3))
            D[:, 0, 0] = 1.0
            D[:, 1, 1] = k
            D[:, 2, 2] = k
            J[idx] = R.T @ D @ R

    def sample_support(self, rng, n):
        u = rng.random((n, 3))
        y = self.delta * u[:, 0]
        r = y * self.tau * np.sqrt(u[:, 1])
        phi = (2 * u[:, 2] - 1) * math.pi
        pts = self.frame.inverse(pr.cyl_to_cart(y, r, phi))
        return pts[self.support(pts)]


@dataclass(frozen=True)
class GMapVertex(ElementaryPinchMap3D):
    """Radial pinch at a vertex; ``delta`` here is the ball radius."""

    kind = "G"

    @property
    def bounding_ball(self):
        return self.frame.origin, self.delta

    def support(self, x):
        v = np.atleast_2d(np.asarray(x, float)) - self.frame.origin
        rho = np.linalg.norm(v, axis=1)
        return (rho > 0) & (rho < self.delta)

    def _apply_inside(self, x):
        v = x - self.frame.origin
        rho = np.linalg.norm(v, axis=1)
        g = pr.g_eval(self.delta, rho)
        dg = pr.g_deriv(self.delta, rho)
        e = v / rho[:, None]
        P = e[:, :, None] * e[:, None, :]
        J = dg[:, None, None] * P + (g / rho)[:, None, None] * (np.eye(3) - P)
        return self.frame.origin + e * g[:, None], J

    def _patch_singular(self, x, outside, J):
        centre = outside & np.all(x == self.frame.origin, axis=1)
        J[centre] = 0.0

    def sample_support(self, rng, n):
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1)[:, None]
        pts = self.frame.origin + v * (self.delta * rng.random(n) ** (1 / 3))[:, None]
        return pts[self.support(pts)]


def _side_band(y, ell, d):
    c = pr.ramp_eval(d / 4, d / 2, y) - pr.ramp_eval(ell - d / 2, ell - d / 4, y)
    dc = pr.ramp_deriv(d / 4, d / 2, y) - pr.ramp_deriv(ell - d / 2, ell - d / 4, y)
    return c, dc


@dataclass(frozen=True)
class BMapSideSector(_CylMap):
    """Rotational pinch toward a face along the middle part of one of its sides."""

    kind = "b"
    ell: float = 0.0
    omega: float = 0.0
    t: float = 0.0

    @property
    def tube(self):
        return self.delta * self.t / 4

    @property
    def bounding_ball(self):
        return self.frame.inverse(np.array([0.5 * self.ell, 0, 0])), math.hypot(0.5 * self.ell, self.tube)

    def support(self, x):
        _, y, r, phi = _cyl(self.frame, x)
        d = self.delta
        return ((y > d / 4) & (y < self.ell - d / 4) & (r > 0) & (r < self.tube)
                & (np.abs(phi) < self.omega))

    def _cyl_formula(self, y, r, phi):
        c1, c1_y = _side_band(y, self.ell, self.delta)
        lo, hi = self.tube / 2, self.tube
        c2 = pr.ramp_eval(lo, hi, r)
        c2_r = pr.ramp_deriv(lo, hi, r)
        g = pr.g_eval(self.omega, phi)
        gp = pr.g_deriv(self.omega, phi)
        phi2 = c1 * ((1 - c2) * g + c2 * phi) + (1 - c1) * phi
        dy = c1_y * (1 - c2) * (g - phi)
        dr = c1 * c2_r * (phi - g)
        dphi = c1 * ((1 - c2) * gp + c2) + 1 - c1
        return (y, r, phi2), _angular_M(len(y), dy, dr, dphi)

    def sample_support(self, rng, n):
        u = rng.random((n, 3))
        d = self.delta
        y = d / 4 + (self.ell - d / 2) * u[:, 0]
        r = self.tube * np.sqrt(u[:, 1])
        phi = (2 * u[:, 2] - 1) * self.omega
        pts = self.frame.inverse(pr.cyl_to_cart(y, r, phi))
        return pts[self.support(pts)]


@dataclass(frozen=True)
class WMapSideTube(_CylMap):
    """Radial pinch toward a side along its middle part."""

    kind = "w"
    ell: float = 0.0
    t: float = 0.0

    @property
    def tube(self):
        return self.delta * self.t / 4

    @property
    def bounding_ball(self):
        return self.frame.inverse(np.array([0.5 * self.ell, 0, 0])), math.hypot(0.5 * self.ell, self.tube)

    def support(self, x):
        _, y, r, _ = _cyl(self.frame, x)
        d = self.delta
        return (y > d / 4) & (y < self.ell - d / 4) & (r > 0) & (r < self.tube)

    def _cyl_formula(self, y, r, phi):
        c, c_y = _side_band(y, self.ell, self.delta)
        g = pr.g_eval(self.tube, r)
        gp = pr.g_deriv(self.tube, r)
        r2 = c * g + (1 - c) * r
        return (y, r2, phi), _radial_M(len(y), c_y * (g - r), c * gp + 1 - c)

    def _patch_singular(self, x, outside, J):
        if not np.any(outside):
            return
        _, y, r, _ = _cyl(self.frame, x[outside])
        d = self.delta
        on_axis = (r == 0) & (y > d / 4) & (y < self.ell - d / 4)
        if np.any(on_axis):
            k = 1 - _side_band(y[on_axis], self.ell, d)[0]
            idx = np.flatnonzero(outside)[on_axis]
            R = self.frame.R
            D = np.zeros((len(k), 3, 3))
            D[:, 0, 0] = 1.0
            D[:, 1, 1] = k
            D[:, 2, 2] = k
            J[idx] = R.T @ D @ R

    def sample_support(self, rng, n):
        u = rng.random((n, 3))
        d = self.delta
        y = d / 4 + (self.ell - d / 2) * u[:, 0]
        r = self.tube * np.sqrt(u[:, 1])
        phi = (2 * u[:, 2] - 1) * math.pi
        pts = self.frame.inverse(pr.cyl_to_cart(y, r, phi))
        return pts[self.support(pts)]


@dataclass(frozen=True)
class SMapFace(ElementaryPinchMap3D):
    """Normal squeeze toward a face, faded out near its sides by the face bump."""

    kind = "s"
    bump: FaceBump | None = None
    t: float = 0.0

    @property
    def height(self):
        return self.delta * self.t**2 / 64

    @property
    def bounding_ball(self):
        P = self.bump.corners
        c2 = P.mean(axis=0)
        rad = float(np.max(np.linalg.norm(P - c2, axis=1)))
        return self.frame.inverse(np.array([c2[0], c2[1], 0.0])), math.hypot(rad, self.height)

    def support(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        p3 = self.frame.apply(x)[:, 2]
        near = (np.abs(p3) < self.height) & (p3 != 0)
        out = np.zeros(len(x), bool)
        if np.any(near):
            out[near] = self.bump(x[near]) > 0
        return out

    def _apply_inside(self, x):
        p = self.frame.apply(x)
        lam, grad = self.bump.value_and_gradient(x)
        p3 = p[:, 2]
        g = pr.g_eval(self.height, p3)
        gp = pr.g_deriv(self.height, p3)
        p2 = p.copy()
        p2[:, 2] = lam * g + (1 - lam) * p3
        R = self.frame.R
        n = R[2]
        # world Jacobian: I + n (grad_world of the p3 increment)^T
        dp3 = (lam * gp + 1 - lam - 1)[:, None] * n + (g - p3)[:, None] * grad
        J = np.eye(3) + n[None, :, None] * dp3[:, None, :]
        return self.frame.inverse(p2), J

    def sample_support(self, rng, n):
        w = rng.dirichlet(np.ones(3), n)
        q = w @ self.bump.corners
        p3 = rng.uniform(-1, 1, n) * self.height
        pts = self.frame.inverse(np.column_stack([q, p3]))
        return pts[self.support(pts)]


# -- builders ----------------------------------------------------------------
def _need(cond, what):
    if not cond:
        raise PreconditionError(what)


def _key(v):
    return tuple(sorted(int(a) for a in v))


def build_map_h(cx, consts, F, S, A, delta):
    F, S, A = _key(F), _key(S), int(A)
    _need(3 * delta < consts.d_A[A], f"h at vertex {A}: need 3*delta < d_A ({delta:.4g}, {consts.d_A[A]:.4g})")
    theta = consts.theta_FA[(F, A)]
    t = h_slope(theta)
    _need(3 * t < math.tan(15 * theta / 16), f"h at {(F, A)}: sector slope exceeds the E cone")
    return HMapFaceSector((F, S, A), local_frame(cx, F, S, A), float(delta), alpha=consts.alpha_A[A], t=t)


def build_map_H(cx, consts, S, A, delta):
    S, A = _key(S), int(A)
    _need(4 * delta < consts.d_A[A], f"H at vertex {A}: need 4*delta < d_A ({delta:.4g}, {consts.d_A[A]:.4g})")
    return HMapSideCone((S, A), edge_frame(cx, S, A), float(delta), tau=math.tan(consts.theta_A[A] / 3))


def build_map_G(cx, consts, A, delta):
    """Radial vertex pinch; the ball has radius ``delta/2`` (see module notes)."""
    A = int(A)
    _need(3 * delta < consts.d_A[A], f"G at vertex {A}: need 3*delta < d_A ({delta:.4g}, {consts.d_A[A]:.4g})")
    fr = Frame(np.eye(3), cx.vertices[A].copy(), (A,))
    return GMapVertex((A,), fr, 0.5 * float(delta))


def build_map_b(cx, consts, F, S, delta):
    F, S = _key(F), _key(S)
    _need(4 * delta < consts.d_S[S], f"b on side {S}: need 4*delta < d_S ({delta:.4g}, {consts.d_S[S]:.4g})")
    return BMapSideSector((F, S), local_frame(cx, F, S, S[0]), float(delta), ell=consts.ell_S[S],
                          omega=consts.omega_S[S] / 3, t=math.tan(consts.theta_S[S] / 3))


def build_map_w(cx, consts, S, delta):
    S = _key(S)
    _need(delta < consts.d_S[S], f"w on side {S}: need delta < d_S ({delta:.4g}, {consts.d_S[S]:.4g})")
    return WMapSideTube((S,), edge_frame(cx, S, S[0]), float(delta), ell=consts.ell_S[S],
                        t=math.tan(consts.theta_S[S] / 3))


def build_map_s(cx, consts, F, delta):
    """``delta`` is the already scaled width (face delta times tan(omega_F/3))."""
    F = _key(F)
    bump = build_face_bump(cx, F, delta, consts)
    return SMapFace((F,), bump.frame, float(delta), bump=bump, t=bump.t)


def derive_deltas(cx: SimplicialComplex, deltas):
    """Per-vertex, per-side and per-face widths as minima over incident simplices."""
    d = np.broadcast_to(np.asarray(deltas, float), (cx.n_simplices,))
    dA = {}
    for A in range(len(cx.vertices)):
        inc = [i for i in range(cx.n_simplices) if A in cx.simplices[i]]
        dA[A] = float(min(d[i] for i in inc)) if inc else float(d.max())
    dS = {S: min(dA[a] for a in S) for S in cx.faces(1)}
    dF = {F: min(dS[S] for S in _sides(F)) for F in cx.faces(2)}
    return dA, dS, dF


@dataclass(frozen=True)
class PairedFaceSectors:
    """The two face-sector pinches of one (face, vertex) pair, applied in a fixed order.

    Their supports overlap inside the face's angle at the vertex, so they are
    grouped and the group is what must be disjoint from other groups.
    """

    members: tuple

    kind = "h"

    @property
    def refs(self):
        F, _, A = self.members[0].refs
        return (F, A)

    @property
    def bounding_ball(self):
        c = self.members[0].frame.origin
        return c, max(m.bounding_ball[1] for m in self.members)

    def support(self, x):
        out = np.zeros(len(np.atleast_2d(x)), bool)
        for m in self.members:
            out |= m.support(x)
        return out

    def apply(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        J = np.broadcast_to(np.eye(3), (len(x), 3, 3)).copy()
        for m in reversed(self.members):
            x, Jm = m.apply(x)
            J = Jm @ J
        return x, J

    def __call__(self, x):
        return self.apply(x)[0]

    def sample_support(self, rng, n):
        k = len(self.members)
        return np.vstack([m.sample_support(rng, n // k + 1) for m in self.members])


def _set_ball(S: SupportSet):
    if S.kind == "E":
        return S.frame.origin, min(S.reach, S.delta * math.hypot(1.0, S.slope))
    if S.kind == "L":
        return S.frame.origin, S.delta * math.hypot(1.0, S.slope)
    if S.kind in ("D", "W"):
        return S.frame.inverse(np.array([0.5 * S.ell, 0, 0])), math.hypot(0.5 * S.ell, S.slope)
    P = S.bump.corners
    c2 = P.mean(axis=0)
    rad = float(np.max(np.linalg.norm(P - c2, axis=1)))
    return S.frame.inverse(np.array([c2[0], c2[1], 0.0])), math.hypot(rad, 0.5 * S.delta * S.t)


def _group_key(S: SupportSet):
    if S.kind == "E":
        F, _, A = S.refs
        return (F, A)
    return S.refs


def disjointness_check(sets, n_samples=1000, seed=0):
    """Sample every set and count points lying in a set of another group of its kind.

    Groups are (face, vertex) for E and the defining refs otherwise.  The
    lemmata allow contact only on a subsimplex, which has measure zero, so
    any hit is a violation.
    """
    rng = np.random.default_rng(seed)
    by_kind = {}
    for S in sets:
        by_kind.setdefault(S.kind, {}).setdefault(_group_key(S), []).append(S)
    report = {}
    for kind, groups in sorted(by_kind.items()):
        keys = list(groups)
        balls = {k: [_set_ball(S) for S in groups[k]] for k in keys}
        samples = {k: np.vstack([S.sample(rng, n_samples) for S in groups[k]]) for k in keys}
        pairs = viol = 0
        offending = []
        for k1, k2 in itertools.permutations(keys, 2):
            near = any(np.linalg.norm(c1 - c2) <= r1 + r2 for c1, r1 in balls[k1] for c2, r2 in balls[k2])
            if not near:
                continue
            pairs += 1
            pts = samples[k1]
            hit = np.zeros(len(pts), bool)
            for S2 in groups[k2]:
                hit |= S2.contains(pts)
            if np.any(hit):
                viol += int(hit.sum())
                offending.append((k1, k2))
        report[kind] = {"groups": len(keys), "pairs_checked": pairs, "violations": viol,
                        "offending": offending[:5]}
    return report


def containment_check(cx, sets, n_samples=1000, seed=0):
    """Largest ratio of (distance to the owning subsimplex) / (allowed collar)."""
    rng = np.random.default_rng(seed)
    V = cx.vertices
    worst = {}
    for S in sets:
        pts = S.sample(rng, n_samples)
        if S.kind in ("E", "K", "Ks"):
            F = S.refs[0]
            dist = np.array([geo.point_triangle_distance(p, *V[list(F)]) for p in pts])
        else:
            side = S.refs[1] if S.kind == "D" else S.refs[0]
            dist = np.array([geo.point_segment_distance(p, V[side[0]], V[side[1]]) for p in pts])
        allowed = S.delta / 4 if S.kind in ("D", "W") else S.delta
        ratio = float(dist.max() / allowed) if len(dist) else 0.0
        worst[S.kind] = max(worst.get(S.kind, 0.0), ratio)
    return worst


@dataclass
class SmoothingMap3D:
    """Composition s∘w∘b∘G∘H∘h with per-simplex widths."""

    complex: SimplicialComplex
    deltas: np.ndarray
    delta_A: dict
    delta_S: dict
    delta_F: dict
    constants: GeometryConstants3D
    stages: dict
    support_sets: list = field(default_factory=list)
    certificate: dict = field(default_factory=dict)

    @property
    def dimension(self):
        return 3

    @property
    def delta(self):
        return float(np.max(self.deltas))

    @property
    def maps(self):
        return [m for k in STAGES for m in self.stages[k]]

    def apply(self, x, return_moved=False):
        x = np.atleast_2d(np.asarray(x, float))
        J = np.broadcast_to(np.eye(3), (len(x), 3, 3)).copy()
        moved = np.zeros(len(x), bool)
        y = x
        for k in STAGES:
            y, J = apply_stage(self.stages[k], y, J, moved)
        return (y, J, moved) if return_moved else (y, J)

    def __call__(self, x):
        return self.apply(x)[0]

    def jacobian(self, x):
        return self.apply(x)[1]

    def stage_order_gap(self, n=10_000, seed=0):
        rng = np.random.default_rng(seed)
        lo, hi = self.complex.vertices.min(0), self.complex.vertices.max(0)
        x = lo + (hi - lo) * rng.random((n, 3))
        maps = self.maps
        extra = [m.sample_support(rng, max(2, n // (2 * len(maps)))) for m in maps]
        x = np.vstack([x] + extra)
        I = np.broadcast_to(np.eye(3), (len(x), 3, 3))
        gap = 0.0
        for k in STAGES:
            a, _ = apply_stage(self.stages[k], x, I)
            b, _ = apply_stage(self.stages[k], x, I, reverse=True)
            gap = max(gap, float(np.max(np.abs(a - b), initial=0.0)))
        return gap


def _certify_maps(stages, n_samples, seed):
    rng = np.random.default_rng(seed)
    out = {}
    for k in STAGES:
        pairs = viol = 0
        offending = []
        maps = stages[k]
        samples = [m.sample_support(rng, n_samples) for m in maps]
        for i, j in itertools.permutations(range(len(maps)), 2):
            c1, r1 = maps[i].bounding_ball
            c2, r2 = maps[j].bounding_ball
            if np.linalg.norm(c1 - c2) > r1 + r2:
                continue
            pairs += 1
            hit = int(np.count_nonzero(maps[j].support(samples[i])))
            if hit:
                viol += hit
                offending.append((maps[i].refs, maps[j].refs))
        out[k] = {"maps": len(maps), "pairs_checked": pairs, "violations": viol, "offending": offending[:5]}
    return out


def build_support_sets(cx, consts, dA, dS, dF):
    sets = []
    for F in cx.faces(2):
        for A in F:
            for S in _sides(F):
                if A in S:
                    sets.append(make_E(cx, consts, F, S, A, dA[A]))
        dk = dF[F] * math.tan(consts.omega_F[F] / 3)
        sets.append(make_K(cx, consts, F, dk))
        sets.append(make_K(cx, consts, F, dk, kind="Ks"))
    for i, S in enumerate(cx.faces(1)):
        for A in S:
            sets.append(make_L(cx, consts, S, A, dA[A]))
        for j in cx.supersimplices(1, i, 2):
            sets.append(make_D(cx, consts, cx.faces(2)[j], S, dS[S]))
        sets.append(make_W(cx, consts, S, dS[S]))
    return sets


def build_xi_3d(cx: SimplicialComplex, deltas, consts=None, *, certify=True, n_samples=1000, seed=0):
    """Assemble the spatial smoothing map for per-simplex widths ``deltas``."""
    if cx.dimension != 3:
        raise ValueError("build_xi_3d needs a complex in R^3")
    d = np.array(np.broadcast_to(np.asarray(deltas, float), (cx.n_simplices,)))
    if np.any(~(d > 0)):
        raise PreconditionError("all widths must be positive")
    if consts is None:
        consts = compute_geometry_constants(cx, float(d.max()))
    caps = delta_caps(cx, consts)
    bad = np.flatnonzero(d > caps)
    if len(bad):
        i = int(bad[0])
        raise PreconditionError(f"width {d[i]:.4g} on simplex {i} exceeds its cap {caps[i]:.4g}")
    dA, dS, dF = derive_deltas(cx, d)
    faces = cx.faces(2)
    stages = {k: [] for k in STAGES}
    for F in faces:
        for A in F:
            pair = [build_map_h(cx, consts, F, S, A, dA[A]) for S in _sides(F) if A in S]
            stages["h"].append(PairedFaceSectors(tuple(pair)))
    for i, S in enumerate(cx.faces(1)):
        for A in S:
            stages["H"].append(build_map_H(cx, consts, S, A, dA[A]))
        for j in cx.supersimplices(1, i, 2):
            stages["b"].append(build_map_b(cx, consts, faces[j], S, dS[S]))
        stages["w"].append(build_map_w(cx, consts, S, dS[S]))
    for A in range(len(cx.vertices)):
        stages["G"].append(build_map_G(cx, consts, A, dA[A]))
    for F in faces:
        stages["s"].append(build_map_s(cx, consts, F, dF[F] * math.tan(consts.omega_F[F] / 3)))
    xi = SmoothingMap3D(cx, d, dA, dS, dF, consts, stages)
    if certify:
        xi.support_sets = build_support_sets(cx, consts, dA, dS, dF)
        lemma = disjointness_check(xi.support_sets, n_samples, seed)
        maps = _certify_maps(stages, n_samples, seed + 1)
        xi.certificate = {"lemmata": lemma, "maps": maps}
        # the literal K collar is reported but not fatal: it is too tall near
        # shared sides, while the squeeze collar Ks is what the maps use
        fatal = [(k, v) for k, v in lemma.items() if k != "K"] + list(maps.items())
        for name, rep in fatal:
            if rep["violations"]:
                raise DisjointnessError(f"{name}: {rep['violations']} overlapping samples, e.g. {rep['offending'][:1]}")
    return xi
