"""Finite simplicial complexes in the plane and in space.

Holds the mesh, its subsimplex tables and incidences, validation,
angle-driven refinement, rigid local frames and every geometric constant the
pinch constructions consume.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from . import geometry as geo

__all__ = [
    "SimplicialComplex",
    "SubsimplexRef",
    "Violation",
    "Frame",
    "GeometryConstants2D",
    "GeometryConstants3D",
    "SubdivisionError",
    "DegenerateGeometryError",
    "validate_complex",
    "subdivide_for_angles",
    "compute_geometry_constants",
    "compute_alpha_A",
    "local_frame",
    "edge_frame",
    "delta_caps",
]

REL_TOL = 1e-9
QUARTER_PI = math.pi / 4


class SubdivisionError(RuntimeError):
    pass


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SubsimplexRef:
    level: int
    id: int
    vertices: tuple
    normal_basis: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class Violation:
    predicate: str
    simplices: tuple
    detail: str = ""

    def __str__(self):
        return f"{self.predicate} {self.simplices}: {self.detail}"


class SimplicialComplex:
    """Vertices plus n-simplices (vertex-index tuples), with derived tables.

    ``faces(k)`` lists the sorted k-subsimplices; ``cofaces(k, i)`` the
    n-simplices containing subsimplex ``i`` of level ``k``.
    """

    def __init__(self, vertices, simplices):
        self.vertices = np.array(vertices, dtype=float)
        self.simplices = np.array(simplices, dtype=int)
        if self.vertices.ndim != 2 or self.simplices.ndim != 2:
            raise ValueError("vertices and simplices must be 2D arrays")
        self.dimension = int(self.vertices.shape[1])
        if self.simplices.shape[1] != self.dimension + 1:
            raise ValueError(
                f"a {self.dimension}-simplex needs {self.dimension + 1} vertices, got {self.simplices.shape[1]}")
        if self.simplices.size and (self.simplices.min() < 0 or self.simplices.max() >= len(self.vertices)):
            raise ValueError("simplex refers to a missing vertex")
        self.vertices.setflags(write=False)
        self.simplices.setflags(write=False)
        self._tables = self._enumerate()

    # -- tables -----------------------------------------------------------
    def _enumerate(self):
        n = self.dimension
        tables = []
        for k in range(n + 1):
            index = {}
            members = []
            for si, simplex in enumerate(self.simplices):
                for sub in itertools.combinations(sorted(int(v) for v in simplex), k + 1):
                    j = index.setdefault(sub, len(index))
                    if j == len(members):
                        members.append([])
                    members[j].append(si)
            tables.append((list(index), index, members))
        return tables

    def faces(self, k):
        return self._tables[k][0]

    def face_index(self, verts):
        verts = tuple(sorted(int(v) for v in verts))
        return self._tables[len(verts) - 1][1][verts]

    def cofaces(self, k, i):
        """n-simplices containing the i-th k-subsimplex."""
        return self._tables[k][2][i]

    def supersimplices(self, k, i, level):
        """Subsimplices of ``level`` (> k) containing the i-th k-subsimplex."""
        verts = set(self.faces(k)[i])
        return [j for j, f in enumerate(self.faces(level)) if verts.issubset(f)]

    @property
    def n_simplices(self):
        return len(self.simplices)

    def edges(self):
        return self.faces(1)

    def simplex_points(self, i):
        return self.vertices[self.simplices[i]]

    def ref(self, k, i):
        verts = self.faces(k)[i]
        return SubsimplexRef(k, i, verts, self.normal_basis(verts))

    def normal_basis(self, verts):
        """Orthonormal basis of directions perpendicular to the subsimplex."""
        P = self.vertices[list(verts)]
        n = self.dimension
        if len(verts) == 1:
            return np.eye(n)
        E = (P[1:] - P[0]).T
        q, _ = np.linalg.qr(np.column_stack([E, np.eye(n)]))
        return q[:, E.shape[1]:n].T.copy()

    def volumes(self):
        return np.array([geo.simplex_volume(self.simplex_points(i)) for i in range(self.n_simplices)])

    @cached_property
    def diameter(self):
        v = self.vertices
        return float(np.max(np.linalg.norm(v[:, None] - v[None], axis=-1))) if len(v) > 1 else 0.0

    def incidence_consistent(self):
        """Each subsimplex lies in some simplex, and coface lists are exact."""
        n = self.dimension
        for k in range(n + 1):
            for i, verts in enumerate(self.faces(k)):
                co = self.cofaces(k, i)
                if not co:
                    return False
                for si in range(self.n_simplices):
                    inside = set(verts).issubset(self.simplices[si])
                    if inside != (si in co):
                        return False
        return True

    def locate(self, x, tol=1e-10):
        """Index of a simplex containing each point (lowest id wins), -1 outside."""
        x = np.atleast_2d(np.asarray(x, float))
        out = np.full(len(x), -1, dtype=int)
        for i in range(self.n_simplices):
            todo = out < 0
            if not np.any(todo):
                break
            lam = geo.barycentric(self.simplex_points(i), x[todo])
            hit = np.all(lam >= -tol, axis=1)
            idx = np.flatnonzero(todo)[hit]
            out[idx] = i
        return out

    def __repr__(self):
        return f"SimplicialComplex(dim={self.dimension}, vertices={len(self.vertices)}, simplices={self.n_simplices})"


# -- validation --------------------------------------------------------------
def _interior_overlap(P, Q, scale):
    """Largest common barycentric margin of two simplices (LP); > 0 means overlap."""
    n = P.shape[1]
    rows, rhs = [], []
    for S in (P, Q):
        E = (S[1:] - S[0]).T
        Einv = np.linalg.inv(E)
        # barycentric lam = B x + b ; require lam_i >= t  ->  -B x + t <= b
        B = np.vstack([-Einv.sum(axis=0), Einv])
        b = np.concatenate([[1.0 + Einv.sum(axis=0) @ S[0]], -Einv @ S[0]])
        rows.append(np.column_stack([-B, np.ones(n + 1)]))
        rhs.append(b)
    A = np.vstack(rows)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=A, b_ub=np.concatenate(rhs), bounds=[(None, None)] * n + [(None, 1.0)], method="highs")
    return -res.fun if res.status == 0 else 0.0


def validate_complex(cx: SimplicialComplex):
    """Return the list of violated invariants (empty means valid)."""
    out = []
    n = cx.dimension
    scale = max(cx.diameter, 1e-300)
    pts = [cx.simplex_points(i) for i in range(cx.n_simplices)]
    for i, P in enumerate(pts):
        if len(set(int(v) for v in cx.simplices[i])) != n + 1:
            out.append(Violation("repeated-vertex", (i,)))
            continue
        det = np.linalg.det((P[1:] - P[0]).T)
        if abs(det) <= REL_TOL * scale**n:
            out.append(Violation("degenerate", (i,), f"det={det:.3e}"))
    bad = {v.simplices[0] for v in out}
    lo = np.array([P.min(axis=0) for P in pts])
    hi = np.array([P.max(axis=0) for P in pts])
    for i in range(cx.n_simplices):
        for j in range(i + 1, cx.n_simplices):
            if i in bad or j in bad:
                continue
            if np.any(lo[i] > hi[j] + REL_TOL * scale) or np.any(lo[j] > hi[i] + REL_TOL * scale):
                continue
            margin = _interior_overlap(pts[i], pts[j], scale)
            if margin > REL_TOL:
                out.append(Violation("interior-overlap", (i, j), f"common barycentric margin {margin:.3e}"))
    # hanging vertices: a vertex touching a simplex it does not belong to
    for i, P in enumerate(pts):
        if i in bad:
            continue
        own = set(int(v) for v in cx.simplices[i])
        others = [v for v in range(len(cx.vertices)) if v not in own]
        if not others:
            continue
        lam = geo.barycentric(P, cx.vertices[others])
        for v, row in zip(others, lam):
            if np.all(row >= -REL_TOL):
                holders = [s for s in range(cx.n_simplices) if v in cx.simplices[s]]
                out.append(Violation("non-conforming", (i,) + tuple(holders[:1]), f"vertex {v} lies on simplex {i}"))
    for f, co in enumerate(cx._tables[n - 1][2]):
        if len(co) > 2:
            out.append(Violation("facet-in-more-than-two", tuple(co), f"facet {cx.faces(n - 1)[f]}"))
    return out


# -- angle refinement --------------------------------------------------------
def _triangle_angles(P):
    ang = []
    for i in range(3):
        a, b, c = P[i], P[(i + 1) % 3], P[(i + 2) % 3]
        ang.append(geo.angle_between(b - a, c - a))
    return ang


def _tet_dihedrals(P):
    """Six interior dihedral angles of a tetrahedron, keyed by edge (i, j)."""
    out = {}
    for i, j in itertools.combinations(range(4), 2):
        k, l = [m for m in range(4) if m not in (i, j)]
        u = geo.unit(P[j] - P[i])
        vk = P[k] - P[i]
        vl = P[l] - P[i]
        vk = vk - (vk @ u) * u
        vl = vl - (vl @ u) * u
        out[(i, j)] = geo.angle_between(vk, vl)
    return out


def _worst_feature(P, n, tol):
    """Return (edge to split, split parameter) for a simplex violating the angle rule."""
    if n == 2:
        ang = _triangle_angles(P)
        i = int(np.argmax(ang))
        if ang[i] <= math.pi / 2 + tol:
            return None
        a, b = (i + 1) % 3, (i + 2) % 3
        ab = P[b] - P[a]
        s = float((P[i] - P[a]) @ ab / (ab @ ab))
        return (a, b), s
    bad = False
    for f in itertools.combinations(range(4), 3):
        if max(_triangle_angles(P[list(f)])) > math.pi / 2 + tol:
            bad = True
    if not bad and max(_tet_dihedrals(P).values()) <= math.pi / 2 + tol:
        return None
    lengths = {e: np.linalg.norm(P[e[0]] - P[e[1]]) for e in itertools.combinations(range(4), 2)}
    return max(lengths, key=lengths.get), 0.5


def subdivide_for_angles(cx: SimplicialComplex, max_depth: int = 30, tol: float = 1e-9):
    """Refine until every face angle (and 3D dihedral) is at most a right angle.

    Splitting an edge splits every simplex containing it, so the mesh stays
    conforming.  Triangles are cut at the foot of the altitude from the obtuse
    corner; tetrahedra are bisected at the midpoint of their longest edge.
    Returns ``(refined_complex, parent)`` where ``parent[j]`` is the input
    simplex containing output simplex ``j``.
    """
    n = cx.dimension
    verts = [np.array(v) for v in cx.vertices]
    simplices = [tuple(int(v) for v in s) for s in cx.simplices]
    parent = list(range(len(simplices)))
    depth = [0] * len(simplices)
    changed = True
    while changed:
        changed = False
        for idx in range(len(simplices)):
            P = np.array([verts[v] for v in simplices[idx]])
            hit = _worst_feature(P, n, tol)
            if hit is None:
                continue
            (la, lb), s = hit
            a, b = simplices[idx][la], simplices[idx][lb]
            verts.append((1 - s) * verts[a] + s * verts[b])
            m = len(verts) - 1
            new_s, new_p, new_d = [], [], []
            for sx, par, dep in zip(simplices, parent, depth):
                if a in sx and b in sx:
                    if dep + 1 > max_depth:
                        raise SubdivisionError(f"angle refinement exceeded depth {max_depth} near simplex {par}")
                    for old in (a, b):
                        new_s.append(tuple(m if v == old else v for v in sx))
                        new_p.append(par)
                        new_d.append(dep + 1)
                else:
                    new_s.append(sx)
                    new_p.append(par)
                    new_d.append(dep)
            simplices, parent, depth = new_s, new_p, new_d
            changed = True
            break
    if len(simplices) == cx.n_simplices:
        return cx, np.arange(cx.n_simplices)
    return SimplicialComplex(np.array(verts), np.array(simplices)), np.array(parent)


# -- frames ------------------------------------------------------------------
@dataclass(frozen=True)
class Frame:
    """Rigid motion ``x -> R (x - origin)``; rows of ``R`` are the new axes."""

    R: np.ndarray
    origin: np.ndarray
    refs: tuple = ()

    def apply(self, x):
        return (np.asarray(x, float) - self.origin) @ self.R.T

    def inverse(self, p):
        return np.asarray(p, float) @ self.R + self.origin

    @property
    def Rinv(self):
        return self.R.T


def local_frame(cx: SimplicialComplex, F, S, A) -> Frame:
    """Frame sending ``A`` to 0, ``S`` onto the first axis, ``F`` into the upper half plane."""
    F = tuple(sorted(int(v) for v in F))
    S = tuple(sorted(int(v) for v in S))
    A = int(A)
    if not (A in S and set(S).issubset(F)):
        raise ValueError(f"non-incident triple F={F}, S={S}, A={A}")
    V = cx.vertices
    other = S[1] if S[0] == A else S[0]
    e1 = geo.unit(V[other] - V[A])
    if cx.dimension == 2:
        R = np.array([e1, [-e1[1], e1[0]]])
        return Frame(R, V[A].copy(), (F, S, A))
    c = [v for v in F if v not in S][0]
    w = V[c] - V[A]
    e2 = geo.unit(w - (w @ e1) * e1)
    e3 = np.cross(e1, e2)
    return Frame(np.array([e1, e2, e3]), V[A].copy(), (F, S, A))


def edge_frame(cx: SimplicialComplex, S, A) -> Frame:
    """Frame of ``(S, A)`` built from the lowest-index face containing ``S``."""
    S = tuple(sorted(int(v) for v in S))
    if cx.dimension == 2:
        return local_frame(cx, S, S, A)
    e = cx.face_index(S)
    F = min(cx.faces(2)[j] for j in cx.supersimplices(1, e, 2))
    return local_frame(cx, F, S, A)


# -- constants ---------------------------------------------------------------
@dataclass
class GeometryConstants2D:
    delta: float
    alpha1: dict
    alpha2: dict
    alpha_S: dict
    m1: dict
    m2: dict
    m_S: dict
    eta1: dict
    eta2: dict
    eta: dict
    ell_S: dict

    def d(self, S):
        return 0.5 * self.delta * self.m_S[S]

    def t(self, S):
        return math.tan(self.alpha_S[S] / 3.0)


@dataclass
class GeometryConstants3D:
    delta: float
    theta_FA: dict
    theta_A: dict
    theta_S: dict
    omega_pair: dict
    omega_S: dict
    omega_F: dict
    d_A: dict
    d_S: dict
    d_F: dict
    ell_S: dict
    alpha_A: dict


def _neighbours(cx):
    nb = {v: set() for v in range(len(cx.vertices))}
    for a, b in cx.faces(1):
        nb[a].add(b)
        nb[b].add(a)
    return nb


def _edges_at(cx):
    out = {v: [] for v in range(len(cx.vertices))}
    for e in cx.faces(1):
        out[e[0]].append(e)
        out[e[1]].append(e)
    return out


def _edge_angle(V, e1, e2, A):
    o1 = e1[1] if e1[0] == A else e1[0]
    o2 = e2[1] if e2[0] == A else e2[0]
    return geo.angle_between(V[o1] - V[A], V[o2] - V[A])


def _min_edge_angle(cx, A, edges_at):
    V = cx.vertices
    es = edges_at[A]
    best = QUARTER_PI
    for e1, e2 in itertools.combinations(es, 2):
        best = min(best, _edge_angle(V, e1, e2, A))
    return best


def _vertex_distances(cx):
    V = cx.vertices
    D = np.linalg.norm(V[:, None] - V[None], axis=-1)
    np.fill_diagonal(D, np.inf)
    d = D.min(axis=1)
    return {v: (float(d[v]) if np.isfinite(d[v]) else cx.diameter) for v in range(len(V))}


def _constants_2d(cx, delta):
    V = cx.vertices
    edges_at = _edges_at(cx)
    nb = _neighbours(cx)
    alpha1 = {v: _min_edge_angle(cx, v, edges_at) for v in range(len(V))}
    alpha2 = {v: min([alpha1[v]] + [alpha1[w] for w in nb[v]]) for v in range(len(V))}
    ell, m1, alpha_S = {}, {}, {}
    areas = cx.volumes()
    for i, S in enumerate(cx.faces(1)):
        ell[S] = float(np.linalg.norm(V[S[0]] - V[S[1]]))
        vals = [1.0, ell[S]] + [areas[T] / ell[S] for T in cx.cofaces(1, i)]
        m1[S] = min(vals)
        alpha_S[S] = min(alpha2[S[0]], alpha2[S[1]])
    m2 = {v: min(m1[S] for S in edges_at[v]) for v in range(len(V))}
    m_S = {S: min(m2[S[0]], m2[S[1]]) for S in cx.faces(1)}
    eta1 = {v: min(math.sqrt(areas[T]) for T in cx.cofaces(0, cx.face_index((v,)))) for v in range(len(V))}
    eta2 = _vertex_distances(cx)
    eta = {v: min(eta1[v], 0.5 * eta2[v]) for v in range(len(V))}
    out = GeometryConstants2D(delta, alpha1, alpha2, alpha_S, m1, m2, m_S, eta1, eta2, eta, ell)
    for name in ("alpha_S", "m_S", "eta"):
        for key, val in getattr(out, name).items():
            if not val > 0:
                raise DegenerateGeometryError(f"{name} vanishes at {key}")
    return out


def _face_third(F, S):
    return [v for v in F if v not in S][0]


def _face_angle_at(V, F, A):
    o = [v for v in F if v != A]
    return geo.angle_between(V[o[0]] - V[A], V[o[1]] - V[A])


def _halfplane_dir(V, S, c):
    u = geo.unit(V[S[1]] - V[S[0]])
    w = V[c] - V[S[0]]
    return geo.unit(w - (w @ u) * u)


def _constants_3d(cx, delta, with_alpha=True):
    V = cx.vertices
    edges_at = _edges_at(cx)
    faces = cx.faces(2)
    theta_FA = {}
    for F in faces:
        for A in F:
            theta_FA[(F, A)] = _face_angle_at(V, F, A)
    theta_A = {v: _min_edge_angle(cx, v, edges_at) for v in range(len(V))}
    omega_pair, omega_S, ell, theta_S = {}, {}, {}, {}
    for i, S in enumerate(cx.faces(1)):
        ell[S] = float(np.linalg.norm(V[S[0]] - V[S[1]]))
        fs = [faces[j] for j in cx.supersimplices(1, i, 2)]
        best = QUARTER_PI
        for F1, F2 in itertools.combinations(fs, 2):
            w = geo.angle_between(_halfplane_dir(V, S, _face_third(F1, S)), _halfplane_dir(V, S, _face_third(F2, S)))
            omega_pair[(S, F1, F2)] = w
            best = min(best, w)
        omega_S[S] = best
        theta_S[S] = min(theta_A[S[0]], theta_A[S[1]], QUARTER_PI)
    omega_F = {}
    for F in faces:
        sides = [tuple(sorted(p)) for p in itertools.combinations(F, 2)]
        omega_F[F] = min([omega_S[S] for S in sides] + [theta_A[A] for A in F])
    d_A = _vertex_distances(cx)
    d_S = {}
    edges = cx.faces(1)
    for S in edges:
        far = [segment for segment in edges if not set(segment) & set(S)]
        dist = min((geo.segment_segment_distance(V[S[0]], V[S[1]], V[E[0]], V[E[1]]) for E in far),
                   default=ell[S])
        d_S[S] = min(d_A[S[0]], d_A[S[1]], dist)
    d_F = {}
    for F in faces:
        sides = [tuple(sorted(p)) for p in itertools.combinations(F, 2)]
        far = [G for G in faces if not set(G) & set(F)]
        dist = min((geo.triangle_triangle_distance(V[list(F)], V[list(G)]) for G in far),
                   default=max(ell[S] for S in sides))
        d_F[F] = min([d_S[S] for S in sides] + [dist])
    out = GeometryConstants3D(delta, theta_FA, theta_A, theta_S, omega_pair, omega_S, omega_F,
                              d_A, d_S, d_F, ell, {})
    for name in ("theta_A", "omega_S", "d_A", "d_S", "d_F"):
        for key, val in getattr(out, name).items():
            if not val > 0:
                raise DegenerateGeometryError(f"{name} vanishes at {key}")
    if with_alpha:
        for A in range(len(V)):
            out.alpha_A[A] = compute_alpha_A(cx, A, None, consts=out)
    return out


def compute_geometry_constants(cx: SimplicialComplex, delta: float):
    """All per-subsimplex angles and distances; ``delta`` is recorded (2D uses it in d(S))."""
    if cx.dimension == 2:
        return _constants_2d(cx, delta)
    if cx.dimension == 3:
        return _constants_3d(cx, delta)
    raise ValueError(f"construction supports dimension 2 or 3, got {cx.dimension}")


# -- safe rotation angle at a vertex ------------------------------------------
def h_slope(theta_FA):
    """Slope ``t`` of the corner-sector pinch: half of tan(5/8 of the face angle)."""
    return 0.5 * math.tan(5.0 * theta_FA / 8.0)


def e_cone_angle(theta_FA):
    """In-plane half-angle of the cone that must stay clear under rotation."""
    return 15.0 * theta_FA / 16.0


def e_cone_reach(theta_FA, delta):
    """Radius of the ball the rotated sector set is cut to at width ``delta``."""
    return delta * math.sqrt(1.0 + 9.0 * h_slope(theta_FA) ** 2)


def _tet_cones(cx, A):
    """Outward normals of the faces through ``A`` of every tetrahedron at ``A``."""
    V = cx.vertices
    out = {}
    for T in cx.cofaces(0, cx.face_index((A,))):
        verts = [int(v) for v in cx.simplices[T]]
        rest = [v for v in verts if v != A]
        normals = []
        for i in range(3):
            b, c = [rest[j] for j in range(3) if j != i]
            n = np.cross(V[b] - V[A], V[c] - V[A])
            if n @ (V[rest[i]] - V[A]) > 0:
                n = -n
            normals.append(n / np.linalg.norm(n))
        out[T] = np.array(normals)
    return out


def _inside_cone(normals, dirs, tol=1e-12):
    return np.all(dirs @ normals.T < -tol, axis=-1)


def _sector_pairs(cx, A):
    """All (F, S) with A in S, S a side of F."""
    out = []
    for F in cx.faces(2):
        if A not in F:
            continue
        for o in F:
            if o != A:
                out.append((F, tuple(sorted((A, o)))))
    return out


def _rotation_clearance(cx, consts, A, F, S, cones, n_phi=1571, n_psi=32):
    fr = local_frame(cx, F, S, A)
    beta = e_cone_angle(consts.theta_FA[(F, A)])
    psi = np.linspace(0.0, beta, n_psi + 1)[1:]
    phi = np.linspace(0.0, math.pi / 2, n_phi)[1:]
    fid = cx.face_index(F)
    holders = cx.cofaces(2, fid)
    V = cx.vertices
    side_of = {}
    for T in holders:
        d = [v for v in cx.simplices[T] if v not in F][0]
        side_of[T] = 1 if fr.apply(V[d])[2] > 0 else -1
    clear = []
    for sigma in (1, -1):
        mine = [T for T in holders if side_of[T] == sigma]
        P, Q = np.meshgrid(phi, psi, indexing="ij")
        loc = np.stack([np.cos(Q), np.sin(Q) * np.cos(P), sigma * np.sin(Q) * np.sin(P)], axis=-1)
        dirs = loc @ fr.R
        if mine:
            ok = _inside_cone(cones[mine[0]], dirs)
        else:
            ok = np.ones(P.shape, bool)
            for T, nrm in cones.items():
                if T not in holders:
                    ok &= ~_inside_cone(nrm, dirs, tol=-1e-12)
        bad = np.flatnonzero(~np.all(ok, axis=1))
        clear.append(phi[bad[0] - 1] if len(bad) and bad[0] > 0 else (0.0 if len(bad) else math.pi / 2))
    return min(clear)


def _arc_dirs(cx, consts, A, F, S, n=400):
    fr = local_frame(cx, F, S, A)
    beta = e_cone_angle(consts.theta_FA[(F, A)])
    psi = np.linspace(0.0, beta, n)
    return np.stack([np.cos(psi), np.sin(psi), 0 * psi], axis=-1) @ fr.R, beta / (n - 1)


def compute_alpha_A(cx: SimplicialComplex, A: int, delta, consts=None) -> float:
    """Positive rotation angle keeping every sector cone at ``A`` (in-plane
    half-angle 15/16 of the face angle) in its two tetrahedra and away from
    the cones of other faces.

    Half of the smallest exact rotational clearance, capped by a third of the
    dihedral clamp of each side at ``A`` and by 0.45 of the smallest angular gap
    between sector arcs of different faces (rotation moves directions by at
    most the rotation angle, so arcs further apart than twice it cannot meet).
    """
    if consts is None:
        consts = _constants_3d(cx, delta, with_alpha=False)
    if delta is not None and not 3 * delta < consts.d_A[A]:
        raise ValueError(f"need 3*delta < d_A at vertex {A}")
    cones = _tet_cones(cx, A)
    pairs = _sector_pairs(cx, A)
    clear = min(_rotation_clearance(cx, consts, A, F, S, cones) for F, S in pairs)
    cap = min(consts.omega_S[S] / 3.0 for _, S in pairs)
    arcs = {p: _arc_dirs(cx, consts, A, *p) for p in pairs}
    gap = math.pi
    blocking = None
    for p1, p2 in itertools.combinations(pairs, 2):
        if p1[0] == p2[0] or p1[1] == p2[1]:
            continue
        (d1, h1), (d2, h2) = arcs[p1], arcs[p2]
        g = float(np.arccos(np.clip(d1 @ d2.T, -1, 1)).min()) - h1 - h2
        if g < gap:
            gap, blocking = g, (p1, p2)
    alpha = min(0.5 * clear, cap, 0.45 * gap, QUARTER_PI)
    if not alpha > 0:
        raise DegenerateGeometryError(f"no positive rotation angle at vertex {A}; blocking pair {blocking}")
    return float(alpha)


def alpha_A_certificate(cx, consts, A, alpha, delta, n_per_sector=2000, seed=0):
    """Sample every sector cone at ``A`` rotated within ``alpha``; count
    containment failures and cross-face intersections."""
    rng = np.random.default_rng(seed)
    V = cx.vertices
    pairs = _sector_pairs(cx, A)
    samples = {}
    for F, S in pairs:
        fr = local_frame(cx, F, S, A)
        theta = consts.theta_FA[(F, A)]
        slope = math.tan(e_cone_angle(theta))
        reach = e_cone_reach(theta, delta)
        y = delta * rng.random(n_per_sector) ** (1 / 3)
        r = slope * y * np.sqrt(rng.random(n_per_sector))
        phi = alpha * (2 * rng.random(n_per_sector) - 1)
        p = np.stack([y, r * np.cos(phi), r * np.sin(phi)], axis=-1)
        p = p[np.einsum("ij,ij->i", p, p) <= reach**2]
        samples[(F, S)] = (fr, p, fr.inverse(p), (slope, reach))
    contain = 0
    for (F, S), (fr, p, x, t) in samples.items():
        holders = set(cx.cofaces(2, cx.face_index(F)))
        for T in range(cx.n_simplices):
            lam = geo.barycentric(cx.simplex_points(T), x)
            inside = np.all(lam > 1e-12, axis=1)
            if T not in holders:
                contain += int(inside.sum())
    cross = 0
    for p1, p2 in itertools.permutations(pairs, 2):
        if p1[0] == p2[0]:
            continue
        fr2, _, _, (slope2, reach2) = samples[p2]
        x1 = samples[p1][2]
        q = fr2.apply(x1)
        y, r = q[:, 0], np.hypot(q[:, 1], q[:, 2])
        phi = np.arctan2(q[:, 2], q[:, 1])
        hit = ((y > 0) & (y < delta) & (r > 0) & (r < slope2 * y) & (np.abs(phi) < alpha)
               & (y * y + r * r <= reach2**2))
        # points on the common subsimplex are allowed
        onS = np.abs(samples[p1][1][:, 2]) < 1e-14
        cross += int((hit & ~onS).sum())
    return {"containment_violations": contain, "disjointness_violations": cross}


# -- admissible pinch widths -------------------------------------------------
def _dist_point_to_edges(V, A, edges):
    return min((geo.point_segment_distance(V[A], V[e[0]], V[e[1]]) for e in edges), default=np.inf)


def delta_caps(cx: SimplicialComplex, consts):
    """Largest admissible pinch width.

    2D returns one scalar; 3D returns one cap per simplex.  The caps keep
    every elementary support inside the star of its subsimplex and make the
    within-stage disjointness arguments apply.
    """
    V = cx.vertices
    if cx.dimension == 2:
        cap = 0.99
        for S in cx.faces(1):
            m = consts.m_S[S]
            cap = min(cap, 0.99 * consts.ell_S[S] / (2 * m))
            # corner sectors (radius 3d) and vertex disks at both ends stay apart
            cap = min(cap, 0.99 * consts.ell_S[S] / (3 * m))
            cap = min(cap, 0.99 * consts.ell_S[S] / (consts.eta[S[0]] + consts.eta[S[1]]))
            tris = cx.cofaces(1, cx.face_index(S))
            for s in S:
                opp = []
                for T in tris:
                    tv = [int(v) for v in cx.simplices[T]]
                    opp.append(tuple(v for v in tv if v != s))
                cap = min(cap, 0.6 * _dist_point_to_edges(V, s, opp) / m)
        for s in range(len(V)):
            far = [e for e in cx.faces(1) if s not in e]
            cap = min(cap, 0.9 * _dist_point_to_edges(V, s, far) / consts.eta[s])
        return float(cap)
    faces = cx.faces(2)
    cap_A = {}
    for A in range(len(V)):
        c = consts.d_A[A] / 5.0
        far = [F for F in faces if A not in F]
        dist = min((geo.point_triangle_distance(V[A], *V[list(F)]) for F in far), default=np.inf)
        for F, S in _sector_pairs(cx, A):
            t = h_slope(consts.theta_FA[(F, A)])
            reach = math.sqrt(1 + 9 * t * t)
            c = min(c, 0.9 * dist / reach)
            # the in-plane sector corner must stay inside F
            fr = local_frame(cx, F, S, A)
            ray = geo.unit(np.array([1.0, 3 * t, 0.0]) @ fr.R)
            opp = [v for v in F if v != A]
            L = _ray_segment(V[A], ray, V[opp[0]], V[opp[1]])
            c = min(c, 0.9 * L / reach)
        cap_A[A] = c
    cap_S = {}
    for S in cx.faces(1):
        far = [F for F in faces if not set(F) & set(S)]
        dist = min((geo.segment_triangle_distance(V[S[0]], V[S[1]], V[list(F)]) for F in far), default=np.inf)
        cap_S[S] = min(0.99 * consts.d_S[S] / 4.0, 0.9 * 4.0 * dist)
    cap_F = {F: 0.99 * consts.d_F[F] / (2.0 * math.tan(consts.omega_F[F] / 3.0)) for F in faces}
    caps = np.empty(cx.n_simplices)
    for i in range(cx.n_simplices):
        tv = set(int(v) for v in cx.simplices[i])
        c = min(cap_A[A] for A in tv)
        c = min(c, min(v for S, v in cap_S.items() if set(S) & tv))
        c = min(c, min(v for F, v in cap_F.items() if set(F) & tv))
        c = min(c, 0.99 * min(consts.d_F[F] for F in faces if set(F) & tv))
        caps[i] = c
    return caps


def _ray_segment(o, d, a, b):
    """Distance along ray ``o + s d`` to segment ``ab`` (coplanar), inf if missed."""
    e = b - a
    M = np.column_stack([d, -e])
    sol, *_ = np.linalg.lstsq(M, a - o, rcond=None)
    s, u = sol
    if s > 0 and -1e-12 <= u <= 1 + 1e-12:
        return float(s)
    return np.inf
