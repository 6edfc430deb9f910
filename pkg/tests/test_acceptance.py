"""Acceptance criteria, each at its stated tolerance and time budget.

Outcomes are also collected by ``conftest.record`` and printed as one line
per criterion in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from conftest import CRITERIA, record
from pinchsmooth import fixtures, primitives as pr
from pinchsmooth.approximation import (
    PiecewiseAffineMap,
    SmoothedMap,
    build_xi,
    choose_deltas,
    norm_linf_diff,
    norm_w1p_diff,
)
from pinchsmooth.verification import (
    DEFAULT_SPECS,
    LEMMATA,
    REPAIRED_LEMMATA,
    SuperposedStage,
    check_c1,
    check_disjointness,
    check_injectivity,
    check_normal_derivatives,
    check_subsimplex_preservation,
    check_uniform_gradient_bound,
    convergence_sweep,
    support_measure_sweep,
)

SWEEP = [0.1, 0.05, 0.025, 0.0125]
WIDTH = {"square": 0.05, "cube": 0.1}
BUDGET = {1: 1, 2: 60, 3: 60, 4: 120, 5: 180, 6: 120, 7: 600, 8: 60, 9: 120}
MAP = {"square": "shear2d", "cube": "twist3d"}


def fixture(name):
    cx = fixtures.MESHES[name]()
    f = PiecewiseAffineMap.from_vertex_images(cx, fixtures.vertex_images(MAP[name], cx))
    return cx, f


def finish(crit, part, passed, detail, t0):
    """Record the outcome, then assert it together with the criterion's budget."""
    elapsed = time.perf_counter() - t0
    spent = sum(p[3] for p in CRITERIA.get(crit, [])) + elapsed
    in_time = spent < BUDGET[crit]
    record(crit, part, passed and in_time, f"{detail}; {spent:.1f}/{BUDGET[crit]} s", elapsed)
    assert in_time, f"criterion {crit} took {spent:.1f} s, budget {BUDGET[crit]} s"
    assert passed, detail


def test_c1_primitive_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for d in np.exp(rng.uniform(math.log(1e-6), math.log(10.0), 50)):
        errs = [
            abs(pr.g_eval(d, d) - d) / d,
            abs(pr.g_eval(d, -d) + d) / d,
            abs(pr.g_deriv(d, 0.0)),
            abs(pr.g_deriv(d, 2 * d / 3) - 4 / 3),
            abs(pr.g_deriv(d, d) - 1.0),
        ]
        x = np.linspace(-d, d, 2001)
        errs.append(max(0.0, pr.g_deriv(d, x).max() - 4 / 3))
        a, b = 0.3 * d, 0.9 * d
        errs += [abs(pr.ramp_eval(a, b, a)), abs(pr.ramp_eval(a, b, b) - 1),
                 abs(pr.ramp_deriv(a, b, a)) * (b - a), abs(pr.ramp_deriv(a, b, b)) * (b - a)]
        worst = max(worst, *errs)
    finish(1, "profile and ramp identities, 50 widths", worst <= 1e-12, f"max error {worst:.2e} (tol 1e-12)", t0)


@pytest.mark.parametrize("name", ["square", "cube"])
def test_c2_normal_derivatives_vanish(name):
    t0 = time.perf_counter()
    cx, _ = fixture(name)
    xi = build_xi(cx, WIDTH[name])
    cert = check_normal_derivatives(xi, cx, DEFAULT_SPECS["normal"])
    finish(2, f"{name} at delta={WIDTH[name]}", cert.passed,
           f"max |d_n Xi| {cert.value:.2e} (tol {cert.threshold:.0e}) over {cert.stats['evaluations']} evaluations", t0)


@pytest.mark.parametrize("name", ["square", "cube"])
def test_c3_smoothed_map_is_c1(name):
    t0 = time.perf_counter()
    cx, f = fixture(name)
    xi = build_xi(cx, WIDTH[name])
    smooth = check_c1(SmoothedMap(f, xi), cx, DEFAULT_SPECS["c1"])
    ok, detail = smooth.passed, f"f~ jump {smooth.stats['relative_jump']:.2e}|Df| (tol 1e-5)"
    if name == "square":
        raw = check_c1(f, cx, DEFAULT_SPECS["c1"])
        rel = raw.stats["relative_jump"]
        ok = ok and rel > 0.1
        detail += f"; raw f jump {rel:.3f}|Df| (must exceed 0.1)"
    finish(3, name, ok, detail, t0)


@pytest.mark.parametrize("name", ["square", "cube"])
def test_c4_injectivity(name):
    t0 = time.perf_counter()
    cx, _ = fixture(name)
    xi = build_xi(cx, WIDTH[name])
    cert = check_injectivity(xi, cx, DEFAULT_SPECS["injectivity"])
    s = cert.stats
    # negative control: one support used twice folds the map
    m = next(iter(xi.maps))
    bad = SuperposedStage([m, m], cx)
    control = check_injectivity(bad, cx, DEFAULT_SPECS["injectivity"].__class__(
        "injectivity", n_samples=100_000, extra={"n_jac": 10_000}), xi=xi)
    ok = cert.passed and s["pairs"] >= 999_000 and s["jacobian_points"] >= 99_000 and not control.passed
    detail = (f"{s['pairs']} pairs, min separation {s['min_separation_uniform']:.2e} far / "
              f"{s['min_separation_close']:.2e} close; {s['jacobian_points']} dets, min {s['min_det']:.2e}, "
              f"{s['det_unresolved']} below rounding floor; {s['moved_outside_collar']} of "
              f"{s['points_outside_collar']} off-collar points moved; negative control "
              f"{'caught (' + control.witness['kind'] + ')' if not control.passed else 'MISSED'}")
    finish(4, name, ok, detail, t0)


def test_c5_support_rate_square():
    t0 = time.perf_counter()
    cx, _ = fixture("square")
    cert = support_measure_sweep(cx, SWEEP, DEFAULT_SPECS["support"])
    fr = ", ".join(f"{v:.4g}" for v in cert.stats["fractions"])
    finish(5, "square", cert.passed, f"slope {cert.value:.3f} (band 1 +- 0.15); fractions {fr}", t0)


@pytest.mark.xfail(strict=True, reason="pre-asymptotic on the cube: edge tubes scale like delta^2 "
                                        "and dominate over this width range (see the decisions ledger)")
def test_c5_support_rate_cube():
    t0 = time.perf_counter()
    cx, _ = fixture("cube")
    cert = support_measure_sweep(cx, SWEEP, DEFAULT_SPECS["support"])
    fr = ", ".join(f"{v:.3g}" for v in cert.stats["fractions"])
    finish(5, "cube (expected failure)", cert.passed,
           f"slope {cert.value:.3f} (band 1 +- 0.15); fractions {fr}", t0)


@pytest.mark.parametrize("name", ["square", "cube"])
def test_c6_uniform_gradient_bound(name):
    t0 = time.perf_counter()
    cx, _ = fixture(name)
    family = [build_xi(cx, d, certify=False) for d in SWEEP]
    cert = check_uniform_gradient_bound(family, cx, DEFAULT_SPECS["gradient"])
    sups = ", ".join(f"{v:.4f}" for v in cert.stats["sup_per_map"])
    finish(6, name, cert.passed, f"max/min {cert.value:.4f} (< 1.25); sups {sups}", t0)


def test_c7_w1p_convergence():
    t0 = time.perf_counter()
    cx, f = fixture("square")
    reports, rates = convergence_sweep(cx, f, SWEEP, [1, 2], linf_samples=20_000)
    e2 = [r.w1p[2.0] for r in reports]
    ratios = [a / b for a, b in zip(e2, e2[1:])]
    ok = rates[1.0] >= 0.8 and 0.35 <= rates[2.0] <= 0.65 and all(1.2 <= q <= 1.7 for q in ratios)
    # sup-norm oracle: |f - f~| <= |Df| times the displacement bound
    lip = f.operator_norms.max()
    ok = ok and all(r.linf <= lip * 2 * r.delta_scalar for r in reports)
    deltas, info = choose_deltas(cx, f, 0.01, 2)
    ok = ok and info["error"] <= 0.01
    cxc, fc = fixture("cube")
    rep3 = norm_w1p_diff(SmoothedMap(fc, build_xi(cxc, WIDTH["cube"], certify=False)), [1, 2])
    linf3, _ = norm_linf_diff(fc, SmoothedMap(fc, build_xi(cxc, WIDTH["cube"], certify=False)), 20_000)
    ok = ok and all(np.isfinite(v) and v > 0 for v in rep3.w1p.values())
    ok = ok and linf3 <= fc.operator_norms.max() * 2 * WIDTH["cube"]
    detail = (f"square rates p=1 {rates[1.0]:.3f} (>= 0.8), p=2 {rates[2.0]:.3f} (in [0.35, 0.65]); "
              f"p=2 halving ratios {', '.join(f'{q:.3f}' for q in ratios)}; eps-mode error "
              f"{info['error']:.2e} at delta {float(np.min(deltas)):.3g}; cube at delta={WIDTH['cube']}: "
              f"p=1 {rep3.w1p[1.0]:.4g}, p=2 {rep3.w1p[2.0]:.4g}, sup {linf3:.3g}")
    finish(7, "shear square sweep, eps-mode, twist cube", ok, detail, t0)


@pytest.mark.parametrize("name", ["square", "cube"])
def test_c8_subsimplex_preservation(name):
    t0 = time.perf_counter()
    cx, _ = fixture(name)
    xi = build_xi(cx, WIDTH[name])
    cert = check_subsimplex_preservation(xi, cx, DEFAULT_SPECS["preservation"])
    finish(8, name, cert.passed, f"max dist(Xi(x), V) {cert.value:.2e} (tol 1e-10)", t0)


def test_c9_disjointness_repaired():
    t0 = time.perf_counter()
    cx, _ = fixture("cube")
    xi = build_xi(cx, WIDTH["cube"])
    cert = check_disjointness(xi, DEFAULT_SPECS["disjointness"], REPAIRED_LEMMATA)
    per = ", ".join(f"{k} {v['violations']}" for k, v in cert.stats.items())
    finish(9, "E, L, D, W and the squeeze collar Ks", cert.passed, f"violations {per}", t0)


@pytest.mark.xfail(strict=True, reason="the literal face collar K is taller than the pinches need and "
                                        "meets neighbouring collars near shared sides (see the decisions ledger)")
def test_c9_disjointness_literal():
    t0 = time.perf_counter()
    cx, _ = fixture("cube")
    xi = build_xi(cx, WIDTH["cube"])
    cert = check_disjointness(xi, DEFAULT_SPECS["disjointness"], LEMMATA)
    per = ", ".join(f"{k} {v['violations']}" for k, v in cert.stats.items())
    finish(9, "E, L, D, W, K literal (expected failure)", cert.passed, f"violations {per}", t0)
