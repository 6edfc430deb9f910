import numpy as np
import pytest

from pinchsmooth import fixtures
from pinchsmooth.approximation import PiecewiseAffineMap, SmoothedMap, build_xi
from pinchsmooth.verification import (
    Certificate,
    CheckSpec,
    SuperposedStage,
    check_c1,
    check_injectivity,
    check_jacobian,
    check_normal_derivatives,
    check_stage_order,
    check_subsimplex_preservation,
    check_support_and_measure,
    fd_jacobian,
    fit_rate,
)


@pytest.fixture(scope="module")
def square():
    cx = fixtures.square4()
    f = PiecewiseAffineMap.from_vertex_images(cx, fixtures.vertex_images("shear2d", cx))
    xi = build_xi(cx, 0.05)
    return cx, f, xi


def test_richardson_differences_are_exact_on_quadratics():
    A = np.array([[1.0, 2.0], [0.5, -1.0]])
    F = lambda x: x @ A.T + 0.3 * x**2  # noqa: E731
    x = np.array([[0.2, -0.4], [1.0, 3.0]])
    J = fd_jacobian(F, x, np.full(2, 1e-3))
    want = A[None] + 0.6 * np.stack([np.diag(p) for p in x])
    np.testing.assert_allclose(J, want, atol=1e-9)


def test_fit_rate():
    d = np.array([0.1, 0.05, 0.025])
    assert fit_rate(d, 3 * d**0.5) == pytest.approx(0.5)
    assert np.isnan(fit_rate([0.1], [1.0]))


def test_certificate_line():
    c = Certificate("demo", True, 0.5, 1.0)
    assert c.line() == "PASS demo: value=0.5 threshold=1"
    assert c.to_dict()["check"] == "demo"


def test_identity_map_is_c1():
    cx = fixtures.square4()
    f = PiecewiseAffineMap.from_vertex_images(cx, cx.vertices)
    assert check_c1(f, cx).passed


def test_raw_map_fails_c1(square):
    cx, f, _ = square
    cert = check_c1(f, cx)
    assert not cert.passed
    assert cert.value > 0.1 * f.operator_norms.max()
    assert "facet" in cert.witness


def test_smoothed_map_and_xi_are_c1(square):
    cx, f, xi = square
    assert check_c1(SmoothedMap(f, xi), cx).passed
    assert check_c1(xi, cx).passed


def test_normal_derivatives_and_preservation(square):
    cx, _, xi = square
    assert check_normal_derivatives(xi, cx).passed
    assert check_subsimplex_preservation(xi, cx).passed


def test_injectivity_small_and_negative_control(square):
    cx, _, xi = square
    spec = CheckSpec("injectivity", n_samples=20_000, extra={"n_jac": 5000})
    assert check_injectivity(xi, cx, spec).passed
    edge = next(m for m in xi.maps if m.kind == "edge_b")
    bad = check_injectivity(SuperposedStage([edge, edge], cx), cx, spec, xi=xi)
    assert not bad.passed
    assert bad.witness["kind"] in ("collision", "determinant")


def test_support_is_local(square):
    cx, _, xi = square
    cent = np.array([cx.simplex_points(i).mean(axis=0) for i in range(4)])
    np.testing.assert_array_equal(xi(cent), cent)
    spec = CheckSpec("support", n_samples=20_000)
    small = check_support_and_measure(xi, cx, spec).value
    big = check_support_and_measure(build_xi(cx, 0.1), cx, spec).value
    assert 0 < small < big


def test_jacobians_and_stage_order(square):
    cx, f, xi = square
    spec = CheckSpec("jacobian", n_samples=2000, fd_step=1e-4, tol=1e-4)
    assert check_jacobian(xi, cx, spec).passed
    assert check_jacobian(SmoothedMap(f, xi), cx, spec).passed
    assert check_stage_order(xi, CheckSpec("order", n_samples=2000, tol=0.0)).passed
