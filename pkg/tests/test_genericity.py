import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import fsolve

from devfill.curve import BoundaryCurve
from devfill.genericity import (check_curvature, find_tangent_incidences, find_torsion_zeros,
                                genericity_report)
from devfill.oracle import sample_loop


def _kidney(t):
    t = np.asarray(t, float)
    return np.stack([np.cos(t), np.sin(t) + 0.4 * np.sin(2 * t), 0.3 * np.sin(3 * t)], -1)


def _kidney_d1(t):
    t = np.asarray(t, float)
    return np.stack([-np.sin(t), np.cos(t) + 0.8 * np.cos(2 * t), 0.9 * np.cos(3 * t)], -1)


def _arclength(d1, t):
    return quad(lambda u: np.linalg.norm(d1(u)), 0, t, epsabs=1e-13, limit=200)[0]


def test_saddle_loop_torsion_zeros(saddle_curve):
    # [DERIVED] sign changes of det(g', g'', g''') from the exact derivatives, on a dense grid
    t = np.linspace(0, 2 * np.pi, 20001)[:-1]
    d1 = np.stack([-np.sin(t), np.cos(t), 0.6 * np.cos(2 * t)], -1)
    d2 = np.stack([-np.cos(t), -np.sin(t), -1.2 * np.sin(2 * t)], -1)
    d3 = np.stack([np.sin(t), -np.cos(t), -2.4 * np.cos(2 * t)], -1)
    num = np.einsum("ij,ij->i", np.cross(d1, d2), d3)
    expected = int(np.count_nonzero(np.sign(num) != np.sign(np.roll(num, -1))))
    scan = find_torsion_zeros(saddle_curve)
    assert len(scan.zeros) == expected == 4
    assert scan.bands == []
    _, _, _, _, tau, _ = saddle_curve.frenet_arrays(np.array(scan.zeros))
    assert np.abs(tau).max() < 1e-6


def test_convex_projection_has_no_incidences(saddle_curve):
    # [DERIVED] the xy-projection is the unit circle, whose tangent lines avoid it elsewhere
    assert find_tangent_incidences(saddle_curve) == []


def test_incidences_match_independent_solver():
    theta, pts = sample_loop(_kidney, 720)
    curve = BoundaryCurve(pts)
    found = find_tangent_incidences(curve)
    assert len(found) > 0

    # [DERIVED] root-find on the analytic parametrisation: g(b) - g(a) orthogonal to two normals at a
    def F(x):
        a, b = x
        T = _kidney_d1(a)
        e1 = np.cross(T, [0.3, 0.5, 0.81])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(T, e1)
        e2 /= np.linalg.norm(e2)
        d = _kidney(b) - _kidney(a)
        return [d @ e1, d @ e2]

    grid = np.linspace(0, 2 * np.pi, 361)[:-1]
    A, B = np.meshgrid(grid, grid, indexing="ij")
    T = _kidney_d1(A.ravel())
    D = _kidney(B.ravel()) - _kidney(A.ravel())
    r = (np.linalg.norm(np.cross(T / np.linalg.norm(T, axis=1)[:, None], D), axis=1)).reshape(A.shape)
    gap = np.abs(np.angle(np.exp(1j * (A - B))))
    is_min = (r < 0.05) & (gap > 0.3)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            is_min &= r <= np.roll(r, (di, dj), axis=(0, 1))
    oracle = []
    for i, j in zip(*np.nonzero(is_min)):
        sol, info, ok, _ = fsolve(F, [A[i, j], B[i, j]], full_output=True, xtol=1e-14)
        if ok != 1 or np.abs(F(sol)).max() > 1e-12:
            continue
        a, b = np.mod(sol, 2 * np.pi)
        if np.abs(np.angle(np.exp(1j * (a - b)))) < 0.1:
            continue
        if all(abs(np.angle(np.exp(1j * (a - p)))) + abs(np.angle(np.exp(1j * (b - q)))) > 1e-6 for p, q in oracle):
            oracle.append((a, b))
    expected = sorted((_arclength(_kidney_d1, a), _arclength(_kidney_d1, b)) for a, b in oracle)
    assert len(found) == len(expected)
    for (s, t), (es, et) in zip(found, expected):
        assert s == pytest.approx(es, abs=1e-6 * curve.length)
        assert t == pytest.approx(et, abs=1e-6 * curve.length)


def test_incidences_stable_under_grid():
    curve = BoundaryCurve(sample_loop(_kidney, 720)[1])
    a = find_tangent_incidences(curve, grid=256)
    b = find_tangent_incidences(curve, grid=512)
    assert np.allclose(a, b, atol=1e-8 * curve.length)


def test_planar_circle_rejected():
    t = 2 * np.pi * np.arange(200) / 200
    circle = BoundaryCurve(np.stack([np.cos(t), np.sin(t), 0 * t], -1))
    report = genericity_report(circle)
    assert not report.passed
    assert "planar" in report.reasons
    assert report.verdict == "fail"


def test_planar_stretch_rejected():
    t = 2 * np.pi * np.arange(600) / 600
    curve = BoundaryCurve(np.stack([np.cos(t), np.sin(t), 0.3 * np.maximum(0, np.sin(t)) ** 4], -1))
    report = genericity_report(curve)
    assert not report.passed
    assert any("torsion vanishes on 1 interval" in r for r in report.reasons)
    (a, b), = report.torsion_bands
    # the flat half is t in [pi, 2 pi]; roughly half the length
    assert 0.35 < ((b - a) % curve.length) / curve.length < 0.5


def test_square_rejected(case):
    report = genericity_report(case("negative_square").boundary)
    assert not report.passed
    assert any("curvature vanishes" in r for r in report.reasons)
    assert len(report.corner_params) == 4


@pytest.mark.parametrize("kind", ["cylinder", "tangent_strip", "two_solution"])
def test_positive_cases_pass(case, kind):
    report = genericity_report(case(kind).boundary)
    assert report.passed, report.reasons
    assert report.margins["min_curvature_over_kappa_min"] > 1


def test_curvature_check_on_circle():
    t = 2 * np.pi * np.arange(200) / 200
    res = check_curvature(BoundaryCurve(np.stack([3 * np.cos(t), 3 * np.sin(t), 0 * t], -1)))
    assert res.passed
    assert res.min_curvature == pytest.approx(1 / 3, rel=1e-8)


def test_report_json_fields(saddle_curve):
    doc = genericity_report(saddle_curve).to_json()
    for key in ("min_curvature", "torsion_zeros", "torsion_bands", "tangent_incidences", "corner_params",
                "verdict", "reasons", "margins"):
        assert key in doc
    assert doc["verdict"] == "pass"
