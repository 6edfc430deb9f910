"""Sampling and finite-difference certification of a smoothing map.

Checks only evaluate maps pointwise; the analytic Jacobians are used solely
by :func:`check_jacobian`, which compares them against finite differences.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry as geo
from .approximation import PiecewiseAffineMap, SmoothedMap, build_xi, norm_linf_diff, norm_w1p_diff
from .construction_3d import disjointness_check
from .quadrature import elementary_maps

__all__ = [
    "CheckSpec",
    "Certificate",
    "SuperposedStage",
    "feature_scale",
    "fd_jacobian",
    "check_injectivity",
    "check_c1",
    "check_normal_derivatives",
    "check_subsimplex_preservation",
    "check_support_and_measure",
    "support_measure_sweep",
    "check_uniform_gradient_bound",
    "check_jacobian",
    "check_stage_order",
    "check_disjointness",
    "convergence_sweep",
    "fit_rate",
    "DEFAULT_SPECS",
    "LEMMATA",
    "REPAIRED_LEMMATA",
]


@dataclass(frozen=True)
class CheckSpec:
    """Sample counts, step and tolerance for one check.

    ``fd_step`` is relative: the absolute step is ``fd_step`` times the local
    feature size at each point.
    """

    name: str
    n_samples: int = 100
    fd_step: float = 1e-3
    tol: float = 1e-5
    seed: int = 0
    extra: dict = field(default_factory=dict)


DEFAULT_SPECS = {
    "normal": CheckSpec("normal", n_samples=100, tol=1e-5),
    "c1": CheckSpec("c1", n_samples=100, tol=1e-5),
    "injectivity": CheckSpec("injectivity", n_samples=1_000_000, extra={"n_jac": 100_000}),
    "preservation": CheckSpec("preservation", n_samples=100, tol=1e-10),
    "support": CheckSpec("support", n_samples=100_000, tol=0.15),
    "gradient": CheckSpec("gradient", n_samples=20_000, tol=0.25),
    "jacobian": CheckSpec("jacobian", n_samples=10_000, fd_step=1e-4, tol=1e-4),
    "order": CheckSpec("order", n_samples=10_000, tol=0.0),
    "disjointness": CheckSpec("disjointness", n_samples=1000),
}


@dataclass
class Certificate:
    check: str
    passed: bool
    value: float
    threshold: float
    witness: list | None = None
    stats: dict = field(default_factory=dict)
    spec: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.check}: value={self.value:.6g} threshold={self.threshold:.6g}"

    def to_dict(self):
        return json.loads(json.dumps(asdict(self), default=_jsonable))


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def _spec_dict(spec):
    return {k: v for k, v in asdict(spec).items()}


# -- maps under test -----------------------------------------------------------
class SuperposedStage:
    """x + Σ (m(x) − x): agrees with the staged composition when supports are
    disjoint, and folds when two supports coincide."""

    def __init__(self, maps, complex=None):
        self.maps = list(maps)
        self.complex = complex

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        out = x.copy()
        for m in self.maps:
            out += m(x) - x
        return out


def _evaluator(target):
    """Callable x -> values for a map, smoothed map or smoothing map."""
    if isinstance(target, SmoothedMap):
        return target.__call__
    if isinstance(target, PiecewiseAffineMap):
        return target.__call__
    return target.__call__


def feature_scale(xi):
    """Smallest length over which the smoothing map varies, over all its pieces."""
    if xi is None:
        return 1.0
    sizes = []
    for m in elementary_maps(xi):
        k = m.kind
        if k == "edge_b":
            sizes.append(m.d * m.t)
        elif k == "corner_a":
            sizes.append(3 * m.d * math.sin(m.alpha / 3))
        elif k == "vertex_e":
            sizes.append(m.eta * m.delta)
        elif k == "h":
            sizes.append(m.delta * m.t)
        elif k == "H":
            sizes.append(m.delta * m.tau / 2)
        elif k == "G":
            sizes.append(m.delta)
        elif k in ("b", "w"):
            sizes.append(m.tube / 2)
        elif k == "s":
            sizes.append(min(m.height, m.bump.outer - m.bump.inner))
    return float(min(sizes)) if sizes else 1.0


def _dist_to_segments(x, A, B):
    d = np.full(len(x), np.inf)
    for a, b in zip(A, B):
        ab = b - a
        t = np.clip((x - a) @ ab / (ab @ ab), 0.0, 1.0)
        d = np.minimum(d, np.linalg.norm(x - (a + t[:, None] * ab), axis=1))
    return d


def _skeleton_distance(cx, x, level):
    """Distance of each point to the union of the ``level``-subsimplices (0 or 1)."""
    if level == 0:
        return np.min(np.linalg.norm(x[:, None] - cx.vertices[None], axis=-1), axis=1)
    E = np.array(cx.faces(1))
    return _dist_to_segments(x, cx.vertices[E[:, 0]], cx.vertices[E[:, 1]])


def _local_step(cx, xi, x, rel):
    """Finite-difference step: a fraction of the feature size, shrunk near the
    skeleton where angular pinches get thin."""
    base = feature_scale(xi)
    near = _skeleton_distance(cx, x, cx.dimension - 2)
    return rel * np.minimum(base, 0.05 * np.maximum(near, 1e-300))


def fd_jacobian(F, x, h):
    """Central-difference Jacobian with one Richardson step (error O(h^2) even
    across the quadratic kinks of the pinch profiles)."""
    x = np.atleast_2d(np.asarray(x, float))
    h = np.broadcast_to(np.asarray(h, float), (len(x),))
    n = x.shape[1]
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(_directional(F, x, np.broadcast_to(e, x.shape), h))
    return np.stack(cols, axis=-1)


def _directional(F, x, v, h):
    def central(s):
        step = (s * h)[:, None] * v
        return (F(x + step) - F(x - step)) / (2 * s * h)[:, None]

    return 2 * central(0.5) - central(1.0)


def _one_sided(F, x, v, h):
    """Second-order one-sided derivative along ``v``."""
    hv = h[:, None] * v
    return (-3 * F(x) + 4 * F(x + hv) - F(x + 2 * hv)) / (2 * h)[:, None]


def _sample_on(cx, verts, n, rng):
    P = cx.vertices[list(verts)]
    if len(verts) == 1:
        return P.copy()
    w = rng.dirichlet(np.ones(len(verts)), n)
    return w @ P


def _lower_faces(cx):
    for k in range(cx.dimension):
        for verts in cx.faces(k):
            yield k, verts


# -- checks -----------------------------------------------------------------
def check_normal_derivatives(xi, cx, spec=DEFAULT_SPECS["normal"], scale=1.0):
    """Directional derivatives of Ξ along every normal of every subsimplex."""
    rng = np.random.default_rng(spec.seed)
    worst, witness, count = 0.0, None, 0
    for k, verts in _lower_faces(cx):
        x = _sample_on(cx, verts, spec.n_samples, rng)
        N = cx.normal_basis(verts)
        h = np.full(len(x), spec.fd_step * feature_scale(xi))
        if k > 0:
            # pinches thin out toward the subsimplex's own boundary
            h = np.minimum(h, spec.fd_step * 0.05 * _boundary_distance(cx, verts, x))
        for nv in N:
            D = _directional(xi, x, np.broadcast_to(nv, x.shape), h)
            mag = np.linalg.norm(D, axis=1)
            count += len(x)
            i = int(np.argmax(mag))
            if mag[i] > worst:
                worst, witness = float(mag[i]), {"subsimplex": list(verts), "point": x[i].tolist(),
                                                 "normal": nv.tolist(), "step": float(h[i])}
    thr = spec.tol * scale
    return Certificate("normal_derivatives", worst <= thr, worst, thr, witness,
                       {"evaluations": count}, _spec_dict(spec))


def _boundary_distance(cx, verts, x):
    """Distance of points of a subsimplex to its relative boundary."""
    verts = list(verts)
    if len(verts) == 2:
        return np.min(np.linalg.norm(x[:, None] - cx.vertices[verts][None], axis=-1), axis=1)
    sides = list(itertools.combinations(verts, 2))
    A = cx.vertices[[s[0] for s in sides]]
    B = cx.vertices[[s[1] for s in sides]]
    return _dist_to_segments(x, A, B)


def _internal_facets(cx):
    k = cx.dimension - 1
    for j, verts in enumerate(cx.faces(k)):
        co = cx.cofaces(k, j)
        if len(co) == 2:
            yield verts, co


def check_c1(target, cx, spec=DEFAULT_SPECS["c1"], xi=None, norm=None):
    """Jump of one-sided normal derivatives across every internal facet.

    ``target`` is a smoothing map, a piecewise affine map or a smoothed map.
    One-sided stencils stay inside the simplex they belong to, and piecewise
    maps are evaluated with that simplex's piece.
    """
    rng = np.random.default_rng(spec.seed)
    if xi is None and not isinstance(target, PiecewiseAffineMap):
        xi = target.xi if isinstance(target, SmoothedMap) else target
    if norm is None:
        f = target.f if isinstance(target, SmoothedMap) else target if isinstance(target, PiecewiseAffineMap) else None
        norm = float(np.max(f.operator_norms)) if f is not None else 1.0
    worst, witness = 0.0, None
    for verts, (ta, tb) in _internal_facets(cx):
        x = _sample_on(cx, verts, spec.n_samples, rng)
        nu = cx.normal_basis(verts)[0]
        # orient nu from ta into tb
        ca = cx.vertices[cx.simplices[ta]].mean(axis=0)
        if (ca - x[0]) @ nu > 0:
            nu = -nu
        h = _local_step(cx, xi, x, spec.fd_step) if xi is not None else np.full(len(x), 1e-6)
        h = np.minimum(h, spec.fd_step * 0.05 * _boundary_distance(cx, verts, x))
        V = np.broadcast_to(nu, x.shape)
        Fa = _piece_evaluator(target, ta)
        Fb = _piece_evaluator(target, tb)
        da = -_one_sided(Fa, x, -V, h)
        db = _one_sided(Fb, x, V, h)
        jump = np.linalg.norm(db - da, axis=1)
        i = int(np.argmax(jump))
        if jump[i] > worst:
            worst, witness = float(jump[i]), {"facet": list(verts), "point": x[i].tolist(), "step": float(h[i])}
    thr = spec.tol * norm
    return Certificate("c1", worst <= thr, worst, thr, witness, {"norm": norm, "relative_jump": worst / norm},
                       _spec_dict(spec))


def _piece_evaluator(target, cell):
    if isinstance(target, PiecewiseAffineMap):
        return lambda x: target(x, np.full(len(x), cell))
    if isinstance(target, SmoothedMap):
        return lambda x: target.evaluate(x, np.full(len(x), cell))[0]
    return target


def _dist_to_subsimplex(cx, verts, y):
    P = cx.vertices[list(verts)]
    if len(verts) == 1:
        return np.linalg.norm(y - P[0], axis=1)
    if len(verts) == 2:
        return _dist_to_segments(y, P[:1], P[1:])
    return np.array([geo.point_triangle_distance(p, *P) for p in y])


def check_subsimplex_preservation(xi, cx, spec=DEFAULT_SPECS["preservation"]):
    """Points of every subsimplex stay on it."""
    rng = np.random.default_rng(spec.seed)
    worst, witness = 0.0, None
    for k, verts in _lower_faces(cx):
        x = _sample_on(cx, verts, spec.n_samples, rng)
        d = _dist_to_subsimplex(cx, verts, xi(x))
        i = int(np.argmax(d))
        if d[i] > worst or witness is None:
            worst, witness = max(worst, float(d[i])), {"subsimplex": list(verts), "point": x[i].tolist()}
    return Certificate("subsimplex_preservation", worst <= spec.tol, worst, spec.tol, witness, {}, _spec_dict(spec))


def _uniform_in_complex(cx, n, rng):
    vols = cx.volumes()
    which = rng.choice(cx.n_simplices, size=n, p=vols / vols.sum())
    w = rng.dirichlet(np.ones(cx.dimension + 1), n)
    return np.einsum("kj,kjd->kd", w, cx.vertices[cx.simplices[which]]), which


def _support_samples(xi, n, rng):
    maps = elementary_maps(xi) if xi is not None and hasattr(xi, "maps") else []
    if not maps:
        return np.empty((0, 0))
    per = max(1, n // len(maps))
    return np.vstack([m.sample_support(rng, per) for m in maps])


def _collar_widths(xi, cx):
    """Width of the boundary collar outside which Ξ must be the identity."""
    if cx.dimension == 2:
        eta = max(xi.constants.eta.values())
        return np.full(cx.n_simplices, xi.delta * max(1.0, eta))
    return np.asarray(xi.deltas, float)


def _facet_distance(cx, cells, x):
    out = np.empty(len(x))
    for i in np.unique(cells):
        sel = cells == i
        lam = geo.barycentric(cx.simplex_points(i), x[sel])
        # barycentric λ_j times the height over facet j is the distance to it
        P = cx.simplex_points(i)
        vol = geo.simplex_volume(P)
        n = cx.dimension
        heights = np.array([n * vol / geo._facet_measure(np.delete(P, j, axis=0)) for j in range(n + 1)])
        out[sel] = np.min(lam * heights, axis=1)
    return out


def check_injectivity(F, cx, spec=DEFAULT_SPECS["injectivity"], xi=None):
    """Pairwise separation, positive Jacobian determinant, identity off the collar.

    Half of the pairs are independent uniform points and must stay more than
    1e-9 apart.  The other half are close pairs seeded inside the supports,
    where a fold would show; Ξ flattens quadratically at the vertices, so
    those only have to stay distinct.
    """
    rng = np.random.default_rng(spec.seed)
    n_pairs = spec.n_samples
    n_jac = spec.extra.get("n_jac", 100_000)
    xi = xi if xi is not None else (F.xi if isinstance(F, SmoothedMap) else F)
    # (a) pairs
    half = n_pairs // 2
    a, _ = _uniform_in_complex(cx, half, rng)
    b, _ = _uniform_in_complex(cx, half, rng)
    close = np.zeros(half, bool)
    seeds = _support_samples(xi, n_pairs - half, rng)
    if len(seeds):
        seeds = seeds[rng.integers(0, len(seeds), n_pairs - half)]
        u = rng.normal(size=seeds.shape)
        u /= np.linalg.norm(u, axis=1)[:, None]
        r = 10 ** rng.uniform(-5.5, math.log10(max(feature_scale(xi), 1e-5)), len(seeds))
        a = np.vstack([a, seeds])
        b = np.vstack([b, seeds + r[:, None] * u])
        close = np.concatenate([close, np.ones(len(seeds), bool)])
    keep = np.linalg.norm(a - b, axis=1) > 1e-6
    a, b, close = a[keep], b[keep], close[keep]
    sep = np.linalg.norm(F(a) - F(b), axis=1)
    bad = np.where(close, sep <= 0.0, sep <= 1e-9)
    i = int(np.argmax(bad)) if np.any(bad) else int(np.argmin(sep))
    pairs_ok = not np.any(bad)
    far_sep = float(np.min(sep[~close], initial=np.inf))
    # (b) determinant of a finite-difference Jacobian
    bulk, _ = _uniform_in_complex(cx, n_jac // 2, rng)
    near = _support_samples(xi, n_jac - len(bulk), rng)
    xs = np.vstack([bulk, near]) if len(near) else bulk
    dets, floor = _fd_determinants(F, xs, _local_step(cx, xi, xs, 1e-3))
    unresolved = np.abs(dets) <= floor
    negative = (dets <= 0) & ~unresolved
    j = int(np.argmax(negative)) if np.any(negative) else int(np.argmin(dets))
    det_ok = not np.any(negative)
    # (c) identity away from the boundary collars, compared bitwise
    pts, cells = _uniform_in_complex(cx, n_jac, rng)
    if hasattr(xi, "constants"):
        far = _facet_distance(cx, cells, pts) > _collar_widths(xi, cx)[cells]
    else:
        far = np.zeros(len(pts), bool)
    moved_far = np.any(F(pts[far]) != pts[far], axis=1) if np.any(far) else np.zeros(0, bool)
    ident_ok = not np.any(moved_far)
    passed = pairs_ok and det_ok and ident_ok
    if not pairs_ok:
        witness = {"kind": "collision", "x": a[i].tolist(), "y": b[i].tolist(), "image_distance": float(sep[i])}
    elif not det_ok:
        witness = {"kind": "determinant", "x": xs[j].tolist(), "det": float(dets[j])}
    elif not ident_ok:
        witness = {"kind": "moved_outside_collar", "x": pts[far][np.argmax(moved_far)].tolist()}
    else:
        witness = {"kind": "closest_pair", "x": a[i].tolist(), "y": b[i].tolist()}
    stats = {"pairs": int(len(a)), "close_pairs": int(close.sum()), "min_separation_uniform": far_sep,
             "min_separation_close": float(np.min(sep[close], initial=np.inf)),
             "jacobian_points": int(len(xs)), "min_det": float(dets[j]), "det_unresolved": int(unresolved.sum()),
             "points_outside_collar": int(np.count_nonzero(far)),
             "moved_outside_collar": int(np.count_nonzero(moved_far))}
    value = float(sep[i]) if not pairs_ok else far_sep
    return Certificate("injectivity", passed, value, 1e-9, witness, stats, _spec_dict(spec))


def _fd_determinants(F, x, h):
    """Determinants of finite-difference Jacobians and a rounding floor.

    Close to a facet the true determinant can sink below what differences
    of O(1) values resolve.  Points with a non-positive value are redone at a
    tenth and ten times the step and the median of the three values is kept:
    a genuine fold is negative at every step, rounding noise is not.
    """
    J = fd_jacobian(F, x, h)
    dets = np.linalg.det(J)
    n = x.shape[1]
    floor = (math.factorial(n) * 8 * np.finfo(float).eps * (1 + np.max(np.abs(x), axis=1)) / h
             * np.max(np.abs(J), axis=(1, 2)) ** (n - 1))
    weak = dets <= 0
    if np.any(weak):
        trio = [dets[weak]] + [np.linalg.det(fd_jacobian(F, x[weak], h[weak] * f)) for f in (0.1, 10.0)]
        dets[weak] = np.median(np.stack(trio), axis=0)
    return dets, floor


def _moved_fraction(xi, cx, n_per_simplex, rng):
    fr = np.empty(cx.n_simplices)
    for i in range(cx.n_simplices):
        w = rng.dirichlet(np.ones(cx.dimension + 1), n_per_simplex)
        x = w @ cx.simplex_points(i)
        fr[i] = np.mean(np.any(xi(x) != x, axis=1))
    return fr


def check_support_and_measure(xi, cx, spec=DEFAULT_SPECS["support"]):
    """Monte Carlo measure of {Ξ ≠ id} in each simplex (bitwise comparison)."""
    rng = np.random.default_rng(spec.seed)
    fr = _moved_fraction(xi, cx, spec.n_samples, rng)
    vols = cx.volumes()
    total = float(fr @ vols / vols.sum())
    return Certificate("support_measure", True, total, float("nan"), None,
                       {"per_simplex": fr.tolist(), "delta": _delta_of(xi)}, _spec_dict(spec))


def _delta_of(xi):
    return float(np.max(getattr(xi, "deltas", getattr(xi, "delta", 0.0))))


def fit_rate(deltas, values):
    """Least-squares slope of log(values) against log(deltas)."""
    deltas, values = np.asarray(deltas, float), np.asarray(values, float)
    if len(deltas) < 2 or np.any(values <= 0):
        return float("nan")
    return float(np.polyfit(np.log(deltas), np.log(values), 1)[0])


def support_measure_sweep(cx, deltas, spec=DEFAULT_SPECS["support"], builder=None):
    """Support measure at each width and the fitted log-log slope (band 1 ± tol)."""
    builder = builder or (lambda d: build_xi(cx, d, certify=False))
    fractions = []
    for d in deltas:
        fractions.append(check_support_and_measure(builder(d), cx, spec).value)
    slope = fit_rate(deltas, fractions)
    ok = bool(abs(slope - 1.0) <= spec.tol) and all(a > b for a, b in zip(fractions, fractions[1:]))
    return Certificate("support_slope", ok, slope, spec.tol, None,
                       {"deltas": list(map(float, deltas)), "fractions": fractions}, _spec_dict(spec))


def _sup_gradient(xi, cx, n, rng):
    x = _support_samples(xi, n, rng)
    bulk, _ = _uniform_in_complex(cx, max(1, n // 10), rng)
    x = np.vstack([x, bulk]) if len(x) else bulk
    J = fd_jacobian(xi, x, _local_step(cx, xi, x, 1e-3))
    s = np.linalg.norm(J, ord=2, axis=(1, 2))
    return float(s.max())


def check_uniform_gradient_bound(xis, cx, spec=DEFAULT_SPECS["gradient"]):
    """Sampled sup |DΞ| for each map of a family; pass if max/min < 1 + tol."""
    if len(xis) < 3:
        raise ValueError("need at least three maps in the family")
    rng = np.random.default_rng(spec.seed)
    sups = [_sup_gradient(xi, cx, spec.n_samples, rng) for xi in xis]
    ratio = max(sups) / min(sups)
    return Certificate("uniform_gradient_bound", ratio < 1 + spec.tol, ratio, 1 + spec.tol, None,
                       {"sup_per_map": sups, "deltas": [_delta_of(x) for x in xis]}, _spec_dict(spec))


def check_jacobian(target, cx, spec=DEFAULT_SPECS["jacobian"], xi=None):
    """Analytic Jacobian against central differences, relative to max(1, |J|)."""
    rng = np.random.default_rng(spec.seed)
    xi = xi if xi is not None else (target.xi if isinstance(target, SmoothedMap) else target)
    bulk, _ = _uniform_in_complex(cx, spec.n_samples // 2, rng)
    near = _support_samples(xi, spec.n_samples - len(bulk), rng)
    x = np.vstack([bulk, near])
    cell = cx.locate(x, tol=0.0)
    x, cells = x[cell >= 0], cell[cell >= 0]
    h = _local_step(cx, xi, x, spec.fd_step)
    # stay clear of facets, where the piecewise maps switch pieces
    clear = _facet_distance(cx, cells, x) > 4 * h
    x, h, cells = x[clear], h[clear], cells[clear]
    if isinstance(target, SmoothedMap):
        J = target.evaluate(x, cells)[1]
        F = _cellwise(target, cells)
    else:
        J = target.jacobian(x)
        F = target
    Jfd = fd_jacobian(F, x, h)
    err = np.linalg.norm(J - Jfd, ord=2, axis=(1, 2)) / np.maximum(1.0, np.linalg.norm(J, ord=2, axis=(1, 2)))
    i = int(np.argmax(err))
    return Certificate("jacobian", bool(err[i] < spec.tol), float(err[i]), spec.tol,
                       {"point": x[i].tolist()}, {"points": int(len(x))}, _spec_dict(spec))


def _cellwise(target, cells):
    return lambda y: target.evaluate(y, cells)[0]


def check_stage_order(xi, spec=DEFAULT_SPECS["order"]):
    """Reversing the order inside each stage must not change the result."""
    gap = xi.stage_order_gap(spec.n_samples, spec.seed)
    return Certificate("stage_order", gap <= spec.tol, gap, spec.tol, None, {}, _spec_dict(spec))


LEMMATA = ("E", "L", "D", "W", "K")
# K replaced by the collar the face squeeze actually occupies
REPAIRED_LEMMATA = ("E", "L", "D", "W", "Ks")


def check_disjointness(xi, spec=DEFAULT_SPECS["disjointness"], lemmata=LEMMATA):
    """Re-sample the separating sets of a spatial smoothing map with a fresh seed."""
    sets = [S for S in xi.support_sets if S.kind in lemmata]
    rep = disjointness_check(sets, spec.n_samples, spec.seed + 7919)
    viol = sum(r["violations"] for r in rep.values())
    per = {k: {"violations": r["violations"], "pairs_checked": r["pairs_checked"]} for k, r in rep.items()}
    bad = next((r["offending"][0] for r in rep.values() if r["violations"]), None)
    name = "disjointness" if "K" not in lemmata else "disjointness_literal"
    return Certificate(name, viol == 0, float(viol), 0.0, {"pair": bad} if bad else None,
                       per, _spec_dict(spec))


def convergence_sweep(cx, f, deltas, ps, *, linf_samples=20_000, seed=0):
    """Norm reports over a width sweep, and the fitted rate per exponent."""
    reports = []
    for d in deltas:
        ft = SmoothedMap(f, build_xi(cx, d, certify=False))
        reports.append(norm_w1p_diff(ft, ps, linf_samples=linf_samples, seed=seed))
    rates = {}
    if len(deltas) >= 2:
        dl = [r.delta_scalar for r in reports]
        for q in reports[0].p:
            rates[q] = fit_rate(dl, [r.w1p[q] for r in reports])
    return reports, rates
