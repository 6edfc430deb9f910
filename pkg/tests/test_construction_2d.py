import math

import numpy as np
import pytest

from pinchsmooth import fixtures
from pinchsmooth.complex_core import compute_geometry_constants, delta_caps
from pinchsmooth.construction_2d import (
    build_corner_pinch,
    build_edge_pinch,
    build_vertex_pinch,
    build_xi_2d,
)

DELTA = 0.05


@pytest.fixture(scope="module")
def square():
    cx = fixtures.square4()
    return cx, compute_geometry_constants(cx, DELTA)


def to_world(m, w, z):
    return m.origin + np.column_stack([np.atleast_1d(w), np.atleast_1d(z)]) @ m.R


def fd_jacobian(F, x, h=1e-7):
    cols = [(F(x + h * e) - F(x - h * e)) / (2 * h) for e in np.eye(2)]
    return np.stack(cols, axis=-1)


def test_edge_pinch_examples(square):
    cx, c = square
    m = build_edge_pinch(cx, (0, 1), DELTA, c)
    ell, dt = m.ell, m.d * m.t
    assert ell / 2 >= 2 * m.d
    mid = to_world(m, ell / 2, 0.0)
    np.testing.assert_array_equal(m(mid), mid)
    y = m(to_world(m, ell / 2, dt / 2))
    z = (y - m.origin) @ m.R[1]
    assert z[0] == pytest.approx(3 * dt / 8, rel=1e-12)
    outside = to_world(m, ell / 2, 1.01 * dt)
    np.testing.assert_array_equal(m(outside), outside)


def test_corner_pinch_examples(square):
    cx, c = square
    m = build_corner_pinch(cx, 0, (0, 1), DELTA, c)
    on_side = to_world(m, m.d, 0.0)
    np.testing.assert_array_equal(m(on_side), on_side)
    r, phi = m.d, m.alpha / 6
    y = m(to_world(m, r * math.cos(phi), r * math.sin(phi)))
    w, z = ((y - m.origin) @ m.R.T)[0]
    assert math.hypot(w, z) == pytest.approx(r, rel=1e-12)
    assert math.atan2(z, w) == pytest.approx(m.alpha / 8, rel=1e-12)
    far = to_world(m, 3.0001 * m.d * math.cos(phi), 3.0001 * m.d * math.sin(phi))
    np.testing.assert_array_equal(m(far), far)


def test_vertex_pinch_examples(square):
    cx, c = square
    m = build_vertex_pinch(cx, 4, DELTA, c)
    s = cx.vertices[4]
    np.testing.assert_array_equal(m(s[None]), s[None])
    rad = m.eta * DELTA
    u = np.array([0.6, 0.8])
    y = m((s + 0.5 * rad * u)[None])[0]
    np.testing.assert_allclose(y, s + 3 * rad / 8 * u, rtol=0, atol=1e-15)
    x = (s + 1.0001 * rad * u)[None]
    np.testing.assert_array_equal(m(x), x)


@pytest.mark.parametrize("which", ["edge", "corner", "vertex"])
def test_elementary_jacobians_match_differences(square, which):
    cx, c = square
    m = {
        "edge": lambda: build_edge_pinch(cx, (1, 4), DELTA, c),
        "corner": lambda: build_corner_pinch(cx, 4, (1, 4), DELTA, c),
        "vertex": lambda: build_vertex_pinch(cx, 1, DELTA, c),
    }[which]()
    rng = np.random.default_rng(3)
    x = m.sample_support(rng, 400)
    J = m.apply(x)[1]
    np.testing.assert_allclose(J, fd_jacobian(m, x), atol=2e-6)


def test_smoothing_map_fixes_interiors_and_edges(square):
    cx, c = square
    xi = build_xi_2d(cx, DELTA)
    # centroids are far from every triangle boundary
    cent = np.array([cx.simplex_points(i).mean(axis=0) for i in range(cx.n_simplices)])
    np.testing.assert_array_equal(xi(cent), cent)
    mids = np.array([cx.vertices[list(S)].mean(axis=0) for S in cx.faces(1)])
    np.testing.assert_allclose(xi(mids), mids, atol=1e-15)
    np.testing.assert_array_equal(xi(cx.vertices), cx.vertices)
    assert xi.stage_order_gap(2000) == 0.0
    assert xi.certificate["violations"] == 0


def test_support_fraction_halves():
    cx = fixtures.square4()
    rng = np.random.default_rng(11)
    x = rng.random((400_000, 2))
    frac = [np.mean(np.any(build_xi_2d(cx, d, certify=False)(x) != x, axis=1)) for d in (0.05, 0.025)]
    assert frac[0] / frac[1] == pytest.approx(2.0, rel=0.2)


def test_cap_is_enforced(square):
    cx, c = square
    cap = delta_caps(cx, c)
    assert 0.9 < cap < 0.95
    with pytest.raises(ValueError):
        build_xi_2d(cx, min(0.999, 1.01 * cap))
    with pytest.raises(ValueError):
        build_xi_2d(fixtures.kuhn_cube(), DELTA)
