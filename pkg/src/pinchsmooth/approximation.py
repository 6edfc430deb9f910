"""Piecewise affine maps, their smoothings f∘Ξ, and the error norms between them."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import geometry as geo
from .complex_core import SimplicialComplex, compute_geometry_constants, delta_caps
from .construction_2d import build_xi_2d
from .construction_3d import build_xi_3d
from .quadrature import elementary_maps, union_rule

log = logging.getLogger(__name__)

__all__ = [
    "PiecewiseAffineMap",
    "SmoothedMap",
    "NormReport",
    "OutsideDomainError",
    "eval_pa",
    "grad_pa",
    "phi_X",
    "collar_volume",
    "collar_width_for_volume",
    "clamp_delta",
    "build_xi",
    "choose_deltas",
    "norm_linf_diff",
    "norm_w1p_diff",
    "CSV_FIELDS",
]


class OutsideDomainError(ValueError):
    pass


@dataclass(frozen=True)
class PiecewiseAffineMap:
    """f(x) = M_i x + c_i on simplex i."""

    complex: SimplicialComplex
    matrices: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        n, N = self.complex.dimension, self.complex.n_simplices
        M = np.asarray(self.matrices, float)
        c = np.asarray(self.offsets, float)
        if M.shape != (N, n, n) or c.shape != (N, n):
            raise ValueError(f"need {N} pieces of shape ({n},{n}) and ({n},), got {M.shape} and {c.shape}")
        object.__setattr__(self, "matrices", M)
        object.__setattr__(self, "offsets", c)

    @classmethod
    def from_vertex_images(cls, cx, images):
        """Affine interpolation of vertex images on every simplex."""
        Y = np.asarray(images, float)
        if Y.shape != cx.vertices.shape:
            raise ValueError(f"expected {cx.vertices.shape} vertex images, got {Y.shape}")
        Ms, cs = [], []
        for T in cx.simplices:
            P, Q = cx.vertices[T], Y[T]
            E, F = (P[1:] - P[0]).T, (Q[1:] - Q[0]).T
            M = np.linalg.solve(E.T, F.T).T
            Ms.append(M)
            cs.append(Q[0] - M @ P[0])
        return cls(cx, np.array(Ms), np.array(cs))

    @property
    def determinants(self):
        return np.linalg.det(self.matrices)

    @property
    def orientation(self):
        """+1 or -1 when every piece has that determinant sign, else 0."""
        s = np.sign(self.determinants)
        return int(s[0]) if np.all(s == s[0]) and s[0] != 0 else 0

    @property
    def operator_norms(self):
        return np.linalg.norm(self.matrices, ord=2, axis=(1, 2))

    def piece(self, i, x):
        return np.atleast_2d(x) @ self.matrices[i].T + self.offsets[i]

    def continuity_defect(self):
        """Largest disagreement of neighbouring pieces at shared vertices."""
        cx = self.complex
        worst = 0.0
        k = cx.dimension - 1
        for j, verts in enumerate(cx.faces(k)):
            co = cx.cofaces(k, j)
            P = cx.vertices[list(verts)]
            vals = [self.piece(i, P) for i in co]
            for v in vals[1:]:
                worst = max(worst, float(np.max(np.abs(v - vals[0]))))
        return worst

    def check(self, tol=1e-10):
        """Problems with the map as a list of messages (empty when sound)."""
        out = []
        if self.orientation == 0:
            out.append("piece determinants do not share one nonzero sign")
        gap = self.continuity_defect()
        if gap > tol:
            out.append(f"pieces disagree on a shared face by {gap:.3g}")
        return out

    def cells(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        cell = self.complex.locate(x)
        if np.any(cell < 0):
            bad = x[np.flatnonzero(cell < 0)[0]]
            raise OutsideDomainError(f"point {bad.tolist()} lies outside the mesh")
        return cell

    def __call__(self, x, cells=None):
        x = np.atleast_2d(np.asarray(x, float))
        cell = self.cells(x) if cells is None else cells
        return np.einsum("kij,kj->ki", self.matrices[cell], x) + self.offsets[cell]

    def gradient(self, x, cells=None):
        cell = self.cells(x) if cells is None else cells
        return self.matrices[cell]


def eval_pa(f: PiecewiseAffineMap, x):
    return f(x)


def grad_pa(f: PiecewiseAffineMap, x):
    return f.gradient(x)


def build_xi(cx, delta, *, certify=True, seed=0):
    """Smoothing map for a scalar width (2D) or per-simplex widths (3D)."""
    if cx.dimension == 2:
        return build_xi_2d(cx, float(np.min(delta)), certify=certify, seed=seed)
    return build_xi_3d(cx, delta, certify=certify, seed=seed)


@dataclass
class SmoothedMap:
    """f̃ = f∘Ξ.  Ξ keeps every simplex in place, so the piece used at Ξ(x)
    is the one of the simplex containing x."""

    f: PiecewiseAffineMap
    xi: object

    @property
    def complex(self):
        return self.f.complex

    def evaluate(self, x, cells=None):
        """Values, Jacobians, Ξ-Jacobians and cells at ``x``."""
        x = np.atleast_2d(np.asarray(x, float))
        cell = self.f.cells(x) if cells is None else cells
        y, J = self.xi.apply(x)
        M = self.f.matrices[cell]
        vals = np.einsum("kij,kj->ki", M, y) + self.f.offsets[cell]
        return vals, M @ J, J, cell

    def __call__(self, x):
        return self.evaluate(x)[0]

    def jacobian(self, x):
        return self.evaluate(x)[1]


def phi_X(p, t):
    """Fundamental function of L^p: t ↦ t^(1/p)."""
    if p < 1:
        raise ValueError(f"exponent must be at least 1, got {p}")
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("measure must be nonnegative")
    out = t ** (1.0 / p)
    return out if out.ndim else float(out)


def collar_volume(P, rho):
    """Volume of the points of simplex ``P`` within distance ``rho`` of its boundary.

    The points at distance at least ``rho`` form a copy of the simplex shrunk
    about its incenter by the factor ``1 - rho/r``.
    """
    P = np.asarray(P, float)
    n = P.shape[1]
    vol = geo.simplex_volume(P)
    _, r = geo.incenter_inradius(P)
    k = np.clip(1.0 - np.asarray(rho, float) / r, 0.0, 1.0)
    return vol * (1.0 - k**n)


def collar_width_for_volume(P, target, phi=lambda v: v):
    """Largest ``rho`` with ``phi(collar_volume(rho)) <= target``, by bisection."""
    P = np.asarray(P, float)
    _, r = geo.incenter_inradius(P)
    if not r > 0:
        raise ValueError("degenerate simplex: zero inradius")
    if phi(collar_volume(P, r)) <= target:
        return math.inf
    if target <= 0:
        return 0.0
    return brentq(lambda rho: phi(collar_volume(P, rho)) - target, 0.0, r, xtol=1e-15 * r, rtol=1e-12)


def _caps(cx):
    consts = compute_geometry_constants(cx, 0.01)
    caps = delta_caps(cx, consts)
    return np.broadcast_to(np.asarray(caps, float), (cx.n_simplices,)).copy()


def clamp_delta(cx, delta):
    """Clip widths to the admissible caps; returns the widths and whether any changed."""
    caps = _caps(cx)
    d = np.broadcast_to(np.asarray(delta, float), (cx.n_simplices,)).copy()
    # stay strictly below the cap so the construction's own check passes
    clipped = np.minimum(d, caps * (1 - 1e-9))
    changed = bool(np.any(clipped < d))
    if cx.dimension == 2:
        return float(clipped.min()), changed
    return clipped, changed


def choose_deltas(cx, f: PiecewiseAffineMap, eps, p, *, c_xi=8.0, verify=True, max_halvings=40, seed=0):
    """Per-simplex widths meeting ``||Df - Df̃||_p <= eps``.

    Each simplex i (counting from 1) gets a collar whose φ-measure is below
    2^-i ε / (2 (1 + c_xi) |M_i|).  The result is then checked by quadrature
    and all widths halved until the target holds.

    Returns ``(deltas, info)``; ``info`` records the a-priori widths, the
    halvings and the final error.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    phi = lambda v: phi_X(p, v)  # noqa: E731
    caps = _caps(cx) * (1 - 1e-9)
    norms = f.operator_norms
    widths = np.empty(cx.n_simplices)
    for i in range(cx.n_simplices):
        target = 2.0 ** -(i + 1) * eps / (2 * (1 + c_xi) * norms[i])
        widths[i] = collar_width_for_volume(cx.simplex_points(i), target, phi)
    deltas = np.minimum(widths, caps)
    info = {"collar_widths": widths.copy(), "caps": caps, "halvings": 0, "error": None}
    if cx.dimension == 2:
        deltas[:] = deltas.min()
    if not verify:
        return deltas, info
    for k in range(max_halvings + 1):
        err = norm_w1p_diff(SmoothedMap(f, build_xi(cx, deltas, certify=False)), [p]).w1p[p]
        info["error"] = err
        info["halvings"] = k
        if err <= eps:
            return deltas, info
        deltas = deltas / 2
    raise RuntimeError(f"error {err:.3g} still above {eps} after {max_halvings} halvings")


CSV_FIELDS = ["delta", "p", "linf", "w1p_error", "support_fraction", "sup_jacobian"]


@dataclass
class NormReport:
    delta: object
    p: list
    linf: float
    linf_point: np.ndarray | None
    w1p: dict
    per_simplex: dict
    support_fraction: float
    sup_jacobian: float
    quadrature: dict = field(default_factory=dict)

    @property
    def delta_scalar(self):
        return float(np.max(self.delta))

    def rows(self):
        return [{"delta": self.delta_scalar, "p": q, "linf": self.linf, "w1p_error": self.w1p[q],
                 "support_fraction": self.support_fraction, "sup_jacobian": self.sup_jacobian}
                for q in self.p]

    def to_csv(self, header=True):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS)
        if header:
            w.writeheader()
        for row in self.rows():
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()


def norm_linf_diff(f: PiecewiseAffineMap, ftilde: SmoothedMap, n_samples=20_000, seed=0):
    """Sampled sup of |f - f̃|, half the samples spread over the supports.

    Returns ``(value, maximizing point)``.
    """
    cx = f.complex
    rng = np.random.default_rng(seed)
    vols = cx.volumes()
    which = rng.choice(cx.n_simplices, size=n_samples // 2, p=vols / vols.sum())
    bary = rng.dirichlet(np.ones(cx.dimension + 1), size=len(which))
    bulk = np.einsum("kj,kjd->kd", bary, cx.vertices[cx.simplices[which]])
    maps = elementary_maps(ftilde.xi)
    per = max(1, (n_samples - len(bulk)) // max(1, len(maps)))
    near = [m.sample_support(rng, per) for m in maps]
    x = np.vstack([bulk] + near)
    cell = cx.locate(x, tol=0.0)
    x, cell = x[cell >= 0], cell[cell >= 0]
    diff = np.linalg.norm(ftilde.evaluate(x, cell)[0] - f(x, cell), axis=1)
    k = int(np.argmax(diff))
    return float(diff[k]), x[k]


def norm_w1p_diff(ftilde: SmoothedMap, ps, *, panels=None, order=4, linf_samples=0, seed=0, error_check=False):
    """||Df - Df̃||_p over the mesh, with per-simplex contributions.

    With ``error_check`` the integral is repeated on a finer rule and the
    relative change is recorded (and logged when above 1%).
    """
    f = ftilde.f
    cx = f.complex
    ps = [float(q) for q in np.atleast_1d(ps)]
    for q in ps:
        phi_X(q, 0.0)
    rule = union_rule(ftilde.xi, panels=panels, order=order)
    _, _, J, cell = ftilde.evaluate(rule.points, rule.cells)
    M = f.matrices[cell]
    n = cx.dimension
    jump = np.linalg.norm(M @ (J - np.eye(n)), ord=2, axis=(1, 2))
    w1p, per = {}, {}
    for q in ps:
        contrib = np.bincount(cell, weights=rule.weights * jump**q, minlength=cx.n_simplices)
        per[q] = contrib ** (1 / q)
        w1p[q] = float(contrib.sum() ** (1 / q))
    meta = {"nodes": len(rule.points), "panels": panels, "order": order}
    if error_check:
        base = 6 if n == 2 else 2
        finer = norm_w1p_diff(ftilde, ps, panels=2 * (panels or base), order=order)
        rel = {q: abs(finer.w1p[q] - w1p[q]) / max(finer.w1p[q], 1e-300) for q in ps}
        meta["relative_change_on_refinement"] = rel
        if max(rel.values()) > 0.01:
            log.warning("quadrature changed by %.2g%% on refinement", 100 * max(rel.values()))
    linf, point = (norm_linf_diff(f, ftilde, linf_samples, seed) if linf_samples else (float("nan"), None))
    total = float(cx.volumes().sum())
    sup_j = float(np.max(np.linalg.norm(J, ord=2, axis=(1, 2)), initial=1.0))
    delta = getattr(ftilde.xi, "deltas", getattr(ftilde.xi, "delta", None))
    return NormReport(delta=delta, p=ps, linf=linf, linf_point=point, w1p=w1p, per_simplex=per,
                      support_fraction=rule.measure / total, sup_jacobian=sup_j, quadrature=meta)
