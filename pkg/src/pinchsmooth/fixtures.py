"""Reference meshes and piecewise affine maps shipped with the package."""
from __future__ import annotations

import itertools

import numpy as np

from .complex_core import SimplicialComplex

__all__ = [
    "square4",
    "kuhn_cube",
    "overlapping_triangles",
    "overlapping_tets",
    "vertex_images",
    "MESHES",
    "MAPS",
]


def square4():
    """Unit square cut by both diagonals (four triangles around the centre)."""
    V = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)]
    T = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return SimplicialComplex(V, T)


def kuhn_cube():
    """Unit cube split into the six Kuhn tetrahedra along the main diagonal."""
    V = [tuple(int(b) for b in np.binary_repr(i, 3)[::-1]) for i in range(8)]
    idx = {v: i for i, v in enumerate(V)}
    T = []
    for perm in itertools.permutations(range(3)):
        p = [0, 0, 0]
        chain = [idx[tuple(p)]]
        for axis in perm:
            p[axis] = 1
            chain.append(idx[tuple(p)])
        T.append(tuple(chain))
    return SimplicialComplex(np.array(V, float), T)


def overlapping_triangles():
    """Negative fixture: two triangles overlapping in a region of positive area."""
    V = [(0, 0), (1, 0), (0, 1), (0.2, 0.2), (1.2, 0.2), (0.2, 1.2)]
    return SimplicialComplex(V, [(0, 1, 2), (3, 4, 5)])


def overlapping_tets():
    """Negative fixture: two tetrahedra with intersecting interiors."""
    V = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1),
         (0.2, 0.2, 0.2), (1.2, 0.2, 0.2), (0.2, 1.2, 0.2), (0.2, 0.2, 1.2)]
    return SimplicialComplex(V, [(0, 1, 2, 3), (4, 5, 6, 7)])


MESHES = {
    "square": square4,
    "cube": kuhn_cube,
    "square-overlap": overlapping_triangles,
    "cube-overlap": overlapping_tets,
}


def _identity(cx, seed=0):
    return cx.vertices.copy()


def _shear2d(cx, seed=0, amount=0.25):
    """Slide every interior vertex horizontally; on the reference square the
    four triangles receive four different shears."""
    V = cx.vertices.copy()
    lo, hi = V.min(axis=0), V.max(axis=0)
    interior = np.all((V > lo + 1e-12) & (V < hi - 1e-12), axis=1)
    V[interior, 0] += amount * (hi[0] - lo[0])
    return V


def _twist3d(cx, seed=0, amount=0.15):
    """Displace vertices along the main diagonal by an amount depending on
    their angle around it.  The diagonal's endpoints stay put, so every
    tetrahedron containing them keeps its volume."""
    V = cx.vertices.copy()
    lo, hi = V.min(axis=0), V.max(axis=0)
    axis = (hi - lo) / np.linalg.norm(hi - lo)
    c = 0.5 * (lo + hi)
    ref = np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
    ref2 = np.cross(axis, ref)
    rel = V - c
    ang = np.arctan2(rel @ ref2, rel @ ref)
    radial = np.linalg.norm(rel - np.outer(rel @ axis, axis), axis=1)
    shift = amount * np.sin(ang) * (radial > 1e-12)
    return V + np.outer(shift, axis)


def _random(cx, seed=0, amount=0.05):
    """Seeded small perturbation of the interior vertices."""
    rng = np.random.default_rng(seed)
    V = cx.vertices.copy()
    lo, hi = V.min(axis=0), V.max(axis=0)
    interior = np.all((V > lo + 1e-12) & (V < hi - 1e-12), axis=1)
    scale = amount * np.min(hi - lo)
    V[interior] += scale * (2 * rng.random((int(interior.sum()), V.shape[1])) - 1)
    return V


MAPS = {
    "identity": _identity,
    "shear2d": _shear2d,
    "twist3d": _twist3d,
    "random-seeded": _random,
}


def vertex_images(name, cx, seed=0):
    if name not in MAPS:
        raise KeyError(f"unknown builtin map {name!r}; choose from {sorted(MAPS)}")
    return MAPS[name](cx, seed=seed)
