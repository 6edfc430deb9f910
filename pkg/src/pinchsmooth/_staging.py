"""Evaluate one stage (a family of disjointly supported maps) on many points."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def apply_stage(stage, x, J, moved=None, reverse=False):
    """Push points ``x`` and accumulated Jacobians ``J`` through one stage.

    Only points inside a map's bounding ball are handed to it; a KD-tree
    over the current points finds them.
    """
    if not stage or not len(x):
        return x, J
    tree = cKDTree(x)
    y = x.copy()
    J = J.copy()
    for m in (reversed(stage) if reverse else stage):
        c, rad = m.bounding_ball
        idx = np.asarray(tree.query_ball_point(c, rad * (1 + 1e-9) + 1e-15), dtype=int)
        if not len(idx):
            continue
        sub = y[idx]
        ys, Js = m.apply(sub)
        if moved is not None:
            moved[idx[m.support(sub)]] = True
        y[idx] = ys
        J[idx] = Js @ J[idx]
    return y, J
