import math

import numpy as np
import pytest

from pinchsmooth import fixtures
from pinchsmooth.approximation import (
    OutsideDomainError,
    PiecewiseAffineMap,
    SmoothedMap,
    build_xi,
    choose_deltas,
    clamp_delta,
    collar_volume,
    collar_width_for_volume,
    eval_pa,
    grad_pa,
    norm_linf_diff,
    norm_w1p_diff,
    phi_X,
)
from pinchsmooth.complex_core import SimplicialComplex
from pinchsmooth.geometry import barycentric


def one_triangle():
    return SimplicialComplex([(0, 0), (2, 0), (0, 2)], [(0, 1, 2)])


def unit_tet():
    return SimplicialComplex([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)], [(0, 1, 2, 3)])


def shear_square():
    cx = fixtures.square4()
    return cx, PiecewiseAffineMap.from_vertex_images(cx, fixtures.vertex_images("shear2d", cx))


def test_identity_map_is_identity():
    cx = fixtures.square4()
    f = PiecewiseAffineMap.from_vertex_images(cx, cx.vertices)
    x = np.random.default_rng(0).random((500, 2))
    np.testing.assert_allclose(eval_pa(f, x), x, atol=1e-15)
    np.testing.assert_allclose(grad_pa(f, x), np.broadcast_to(np.eye(2), (500, 2, 2)), atol=1e-15)


def test_shear_example():
    cx = one_triangle()
    M = np.array([[1.0, 1.0], [0.0, 1.0]])
    f = PiecewiseAffineMap.from_vertex_images(cx, cx.vertices @ M.T)
    np.testing.assert_allclose(f(np.array([[0.5, 0.5]])), [[1.0, 0.5]], atol=1e-15)


def test_pieces_agree_on_shared_facets():
    cx, f = shear_square()
    assert f.continuity_defect() < 1e-10
    assert f.check() == []
    for j, verts in enumerate(cx.faces(1)):
        co = cx.cofaces(1, j)
        if len(co) == 2:
            mid = cx.vertices[list(verts)].mean(axis=0)
            np.testing.assert_allclose(f.piece(co[0], mid), f.piece(co[1], mid), atol=1e-10)


def test_broken_map_is_reported():
    cx, f = shear_square()
    c = f.offsets.copy()
    c[0] += 0.1
    assert any("disagree" in m for m in PiecewiseAffineMap(cx, f.matrices, c).check())
    M = f.matrices.copy()
    M[1] = M[1] @ np.diag([1.0, -1.0])
    assert any("sign" in m for m in PiecewiseAffineMap(cx, M, f.offsets).check())
    with pytest.raises(ValueError):
        PiecewiseAffineMap(cx, f.matrices[:2], f.offsets[:2])
    with pytest.raises(OutsideDomainError):
        f(np.array([[2.0, 2.0]]))


def test_fundamental_function():
    assert phi_X(1, 0.25) == 0.25
    assert phi_X(2, 0.25) == 0.5
    t = 10.0 ** -np.arange(1, 13)
    v = phi_X(3, t)
    assert np.all(np.diff(v) < 0) and v[-1] < 1e-3
    with pytest.raises(ValueError):
        phi_X(0.5, 0.1)


def test_collar_volume_matches_sampling():
    P = unit_tet().simplex_points(0)
    rho = collar_width_for_volume(P, 0.01, lambda v: phi_X(1, v))
    assert collar_volume(P, rho) == pytest.approx(0.01, rel=1e-10)
    rng = np.random.default_rng(4)
    x = rng.dirichlet(np.ones(4), 1_000_000) @ P
    # distance to the boundary of the unit corner simplex
    dist = np.minimum(x.min(axis=1), (1 - x.sum(axis=1)) / math.sqrt(3))
    mc = np.mean(dist < rho) / 6
    assert mc == pytest.approx(0.01, rel=0.05)


def test_collar_width_edge_cases():
    P = unit_tet().simplex_points(0)
    assert collar_width_for_volume(P, 1.0) == math.inf
    assert collar_width_for_volume(P, 0.0) == 0.0
    assert collar_volume(P, 10.0) == pytest.approx(1 / 6)


def test_huge_eps_hits_the_cap():
    cx, f = shear_square()
    d, info = choose_deltas(cx, f, 1e6, 2, verify=False)
    assert d[0] == pytest.approx(info["caps"].min())


def test_halving_eps_shrinks_widths():
    cx = fixtures.kuhn_cube()
    f = PiecewiseAffineMap.from_vertex_images(cx, fixtures.vertex_images("twist3d", cx))
    prev = None
    for eps in (1e-1, 5e-2, 2.5e-2, 1.25e-2):
        d, _ = choose_deltas(cx, f, eps, 1, verify=False)
        if prev is not None:
            assert np.all(d <= prev)
        prev = d


def test_eps_mode_meets_its_target():
    cx, f = shear_square()
    d, info = choose_deltas(cx, f, 0.01, 2)
    assert info["error"] <= 0.01
    assert np.all(d > 0)


def test_clamp():
    cx = fixtures.square4()
    d, changed = clamp_delta(cx, 5.0)
    assert changed and 0.9 < d < 0.95
    assert clamp_delta(cx, 0.05) == (0.05, False)


def test_linf_of_identity_is_displacement():
    cx = fixtures.square4()
    f = PiecewiseAffineMap.from_vertex_images(cx, cx.vertices)
    vals = []
    for d in (0.1, 0.05, 0.025):
        xi = build_xi(cx, d, certify=False)
        v, pt = norm_linf_diff(f, SmoothedMap(f, xi), 20_000)
        np.testing.assert_allclose(np.linalg.norm(xi(pt[None])[0] - pt), v, rtol=1e-12)
        assert v <= 2 * d
        vals.append(v)
    assert vals[0] > vals[1] > vals[2]


def test_linf_lipschitz_bound():
    cx, f = shear_square()
    for d in (0.1, 0.05):
        v, _ = norm_linf_diff(f, SmoothedMap(f, build_xi(cx, d, certify=False)))
        assert v <= f.operator_norms.max() * 2 * d


def test_constant_map_has_zero_error():
    cx = fixtures.square4()
    f = PiecewiseAffineMap(cx, np.zeros((4, 2, 2)), np.ones((4, 2)))
    rep = norm_w1p_diff(SmoothedMap(f, build_xi(cx, 0.05, certify=False)), [1, 2])
    assert rep.w1p == {1.0: 0.0, 2.0: 0.0}


@pytest.mark.parametrize("p", [1, 2])
def test_w1p_matches_monte_carlo(p):
    cx = one_triangle()
    f = PiecewiseAffineMap.from_vertex_images(cx, cx.vertices)
    xi = build_xi(cx, 0.05, certify=False)
    quad = norm_w1p_diff(SmoothedMap(f, xi), [p]).w1p[float(p)]
    rng = np.random.default_rng(8)
    P = cx.simplex_points(0)
    total = 0.0
    n = 2_000_000
    for _ in range(4):
        x = rng.dirichlet(np.ones(3), n // 4) @ P
        J = xi.jacobian(x)
        total += np.sum(np.linalg.norm(J - np.eye(2), ord=2, axis=(1, 2)) ** p)
    mc = (total / n * 2.0) ** (1 / p)
    assert quad == pytest.approx(mc, rel=0.03)


def test_report_rows_and_csv():
    cx, f = shear_square()
    rep = norm_w1p_diff(SmoothedMap(f, build_xi(cx, 0.05, certify=False)), [1, 2], linf_samples=2000)
    assert [r["p"] for r in rep.rows()] == [1.0, 2.0]
    lines = rep.to_csv().strip().splitlines()
    assert lines[0] == "delta,p,linf,w1p_error,support_fraction,sup_jacobian"
    assert len(lines) == 3
    assert 0 < rep.support_fraction < 1
    assert rep.sup_jacobian >= 1.0


def test_smoothed_map_uses_the_simplex_of_the_point():
    cx, f = shear_square()
    ft = SmoothedMap(f, build_xi(cx, 0.05, certify=False))
    rng = np.random.default_rng(1)
    x = rng.random((2000, 2))
    vals, J, _, cell = ft.evaluate(x)
    y = ft.xi(x)
    lam = np.stack([barycentric(cx.simplex_points(c), y[k:k + 1])[0] for k, c in enumerate(cell)])
    assert lam.min() > -1e-12
    np.testing.assert_allclose(vals, f(y, cell), atol=1e-14)
