"""JSON mesh and map files.

Mesh: ``{"dimension": n, "vertices": [[...], ...], "simplices": [[i, ...], ...]}``
with 0-based vertex indices.  Map: ``[{"matrix": [...n*n row-major...],
"offset": [...n...]}, ...]`` aligned with the mesh's simplex order.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .approximation import PiecewiseAffineMap
from .complex_core import SimplicialComplex

__all__ = ["InputError", "load_mesh", "dump_mesh", "load_map", "dump_map", "mesh_to_dict", "map_to_list"]


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None


def mesh_to_dict(cx: SimplicialComplex):
    return {"dimension": cx.dimension, "vertices": cx.vertices.tolist(), "simplices": cx.simplices.tolist()}


def mesh_from_dict(doc, source="mesh"):
    if not isinstance(doc, dict) or not {"dimension", "vertices", "simplices"} <= doc.keys():
        raise InputError(f"{source}: needs the fields dimension, vertices, simplices")
    n = doc["dimension"]
    if not isinstance(n, int) or n < 1:
        raise InputError(f"{source}: dimension must be a positive integer")
    try:
        V = np.array(doc["vertices"], dtype=float)
        T = np.array(doc["simplices"], dtype=int)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{source}: {exc}") from None
    if V.ndim != 2 or V.shape[1] != n:
        raise InputError(f"{source}: vertices must be {n}-tuples")
    if T.ndim != 2 or T.shape[1] != n + 1:
        raise InputError(f"{source}: simplices must be {n + 1}-tuples")
    if not np.all(np.isfinite(V)):
        raise InputError(f"{source}: non-finite vertex coordinate")
    try:
        return SimplicialComplex(V, T)
    except ValueError as exc:
        raise InputError(f"{source}: {exc}") from None


def load_mesh(path):
    return mesh_from_dict(_read_json(path), str(path))


def dump_mesh(cx, path):
    Path(path).write_text(json.dumps(mesh_to_dict(cx)) + "\n")


def map_to_list(f: PiecewiseAffineMap):
    return [{"matrix": M.ravel().tolist(), "offset": c.tolist()} for M, c in zip(f.matrices, f.offsets)]


def map_from_list(doc, cx, source="map"):
    n = cx.dimension
    if not isinstance(doc, list):
        raise InputError(f"{source}: expected an array of pieces")
    if len(doc) != cx.n_simplices:
        raise InputError(f"{source}: {len(doc)} pieces for {cx.n_simplices} simplices")
    Ms, cs = [], []
    for i, piece in enumerate(doc):
        if not isinstance(piece, dict) or not {"matrix", "offset"} <= piece.keys():
            raise InputError(f"{source}: piece {i} needs matrix and offset")
        M = np.asarray(piece["matrix"], dtype=float)
        c = np.asarray(piece["offset"], dtype=float)
        if M.size != n * n or c.shape != (n,):
            raise InputError(f"{source}: piece {i} has the wrong size for dimension {n}")
        Ms.append(M.reshape(n, n))
        cs.append(c)
    return PiecewiseAffineMap(cx, np.array(Ms), np.array(cs))


def load_map(path, cx):
    return map_from_list(_read_json(path), cx, str(path))


def dump_map(f, path):
    Path(path).write_text(json.dumps(map_to_list(f)) + "\n")
