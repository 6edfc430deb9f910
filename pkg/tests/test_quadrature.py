import math

import numpy as np
import pytest

from pinchsmooth import fixtures
from pinchsmooth.approximation import build_xi
from pinchsmooth.quadrature import elementary_maps, support_multiplicity, support_rule, union_rule
from pinchsmooth.verification import fit_rate


def test_gauss_rule_integrates_polynomials():
    cx = fixtures.square4()
    xi = build_xi(cx, 0.05, certify=False)
    for m in elementary_maps(xi):
        r = support_rule(m, cx)
        assert r.measure == pytest.approx(m.support_area(), rel=1e-10)


def test_nodes_lie_in_their_support():
    cx = fixtures.kuhn_cube()
    xi = build_xi(cx, 0.05, certify=False)
    for m in elementary_maps(xi):
        r = support_rule(m, cx, panels=1, order=3)
        assert np.mean(m.support(r.points)) > 0.99, m.kind


def test_multiplicity_counts_overlaps():
    cx = fixtures.square4()
    xi = build_xi(cx, 0.05, certify=False)
    maps = elementary_maps(xi)
    centroid = np.array([[0.25, 0.5]])
    assert support_multiplicity(maps, centroid)[0] == 0
    x = np.array([[1e-3, 1e-4]])
    assert support_multiplicity(maps, x)[0] == sum(bool(m.support(x)[0]) for m in maps)


@pytest.mark.parametrize("name,delta,n", [("square", 0.05, 2_000_000), ("cube", 0.1, 500_000)])
def test_union_measure_matches_sampling(name, delta, n):
    cx = fixtures.MESHES[name]()
    xi = build_xi(cx, delta, certify=False)
    rule = union_rule(xi)
    assert np.all(rule.cells >= 0) and np.all(rule.weights > 0)
    x = np.random.default_rng(6).random((n, cx.dimension))
    hit = np.zeros(n, bool)
    for m in elementary_maps(xi):
        hit |= m.support(x)
    mc = hit.mean()
    se = math.sqrt(mc * (1 - mc) / n)
    assert abs(rule.measure - mc) < max(5 * se, 0.01 * mc)


def test_refinement_changes_little():
    cx = fixtures.square4()
    xi = build_xi(cx, 0.05, certify=False)
    a, b = union_rule(xi).measure, union_rule(xi, panels=12).measure
    assert a == pytest.approx(b, rel=1e-3)


def test_cube_support_rate_reaches_one_for_small_widths():
    # over the acceptance sweep the cube's edge tubes (measure ~ delta^2) dominate;
    # a few octaves further down the linear face and corner terms take over
    cx = fixtures.kuhn_cube()
    deltas = [1e-3, 2.5e-4, 6.25e-5]
    meas = [union_rule(build_xi(cx, d, certify=False)).measure for d in deltas]
    slope = fit_rate(deltas, meas)
    assert slope == pytest.approx(1.0, abs=0.05)
