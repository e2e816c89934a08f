import json

import numpy as np
import pytest

from devfill.bitangency import eval_D
from devfill.errors import NormalFieldDegenerate
from devfill.oracle import KINDS, RuledPatch, make_case, torsal_from_normal, write_case


def _helix(u):
    u = np.asarray(u, float)
    return np.stack([np.cos(u), np.sin(u), 0.4 * u], -1)


def _helix_frame(u):
    u = np.asarray(u, float)
    T = np.stack([-np.sin(u), np.cos(u), np.full_like(u, 0.4)], -1) / np.sqrt(1.16)
    N = np.stack([-np.cos(u), -np.sin(u), 0 * u], -1)
    return T, N, np.cross(T, N)


def test_any_normal_field_gives_torsal_patch():
    # a unit normal field along the curve, rotating in the normal plane at a varying rate
    def normal(u):
        _, N, B = _helix_frame(u)
        phi = 0.7 * np.sin(1.3 * u) + 0.2 * u
        return np.cos(phi)[:, None] * N + np.sin(phi)[:, None] * B

    patch = torsal_from_normal(_helix, normal, np.linspace(0.1, 5.0, 200))
    assert patch.determinant_residual().max() < 1e-6


def test_cylinder_normal_gives_axis_rulings():
    # [DERIVED] on x^2 + z^2 = 1 the surface normal is (x, 0, z) and rulings are parallel to y
    def gamma(u):
        u = np.asarray(u, float)
        return np.stack([np.sin(u), 0.3 * np.sin(2 * u), np.cos(u)], -1)

    def normal(u):
        u = np.asarray(u, float)
        return np.stack([np.sin(u), 0 * u, np.cos(u)], -1)

    patch = torsal_from_normal(gamma, normal, np.linspace(0, 2, 50))
    w = patch.direction / np.linalg.norm(patch.direction, axis=1)[:, None]
    assert np.allclose(np.abs(w[:, 1]), 1.0, atol=1e-9)
    assert patch.determinant_residual().max() < 1e-8


def test_hyperboloid_rulings_are_not_torsal():
    # rulings of the one-sheeted hyperboloid: a doubly ruled, non-developable surface
    u = np.linspace(0, 2, 50)
    base = np.stack([np.cos(u), np.sin(u), 0 * u], -1)
    d = np.stack([-np.sin(u), np.cos(u), np.ones_like(u)], -1)
    dd = np.stack([-np.cos(u), -np.sin(u), 0 * u], -1)
    patch = RuledPatch(u, base, d, d * [1, 1, 0], dd)
    assert patch.determinant_residual().min() > 0.1


def test_constant_normal_is_degenerate():
    def gamma(u):
        u = np.asarray(u, float)
        return np.stack([np.cos(u), np.sin(u), 0 * u], -1)

    with pytest.raises(NormalFieldDegenerate):
        torsal_from_normal(gamma, lambda u: np.tile([0.0, 0, 1], (len(np.atleast_1d(u)), 1)), np.linspace(0, 1, 10))


def test_normal_must_be_orthogonal():
    with pytest.raises(ValueError):
        torsal_from_normal(_helix, lambda u: _helix_frame(u)[0], np.linspace(0, 1, 10))


@pytest.mark.parametrize("kind", ["cylinder", "tangent_strip", "two_solution"])
def test_constructed_pairs_are_bitangent(case, kind):
    c = case(kind)
    L = c.boundary.length
    for P in c.correspondences:
        assert np.abs(eval_D(c.boundary, P[:, 0], P[:, 1])).max() < 1e-8 * L**3


def test_cylinder_truth_lies_on_cylinder(case):
    c = case("cylinder")
    r = c.params["radius"]
    pts = c.truth_points(100, 9)[0]
    assert np.abs(np.hypot(pts[:, 0], pts[:, 2]) - r).max() < 1e-12


def test_two_solution_truth_on_parabolic_cylinders(case):
    c = case("two_solution")
    eps, mu = c.params["eps"], c.params["mu"]
    a, b = c.truth_points(60, 7)
    assert np.abs(a[:, 2] - (a[:, 0] ** 2 + eps * a[:, 0] ** 3)).max() < 1e-12
    assert np.abs(b[:, 2] - (1 - b[:, 1] ** 2 + mu * b[:, 1] ** 3)).max() < 1e-12
    # and the boundary lies on both
    P = c.boundary.points
    assert np.abs(P[:, 2] - (P[:, 0] ** 2 + eps * P[:, 0] ** 3)).max() < 1e-12
    assert np.abs(P[:, 2] - (1 - P[:, 1] ** 2 + mu * P[:, 1] ** 3)).max() < 1e-12


def test_expected_counts(case):
    assert case("cylinder").expected_solution_count == 1
    assert case("tangent_strip").expected_solution_count == 1
    assert case("two_solution").expected_solution_count == 2
    assert case("negative_planar").negative_control


def test_write_case(tmp_path, case):
    c = case("cylinder")
    write_case(c, tmp_path / "c.json", tmp_path / "c.truth.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    side = json.loads((tmp_path / "c.truth.json").read_text())
    assert len(doc["points"]) == len(c.boundary.points)
    assert side["expected_solution_count"] == 1
    assert side["closed_form_abs_mean_curvature"] == pytest.approx(0.5)
    assert len(side["correspondences"]) == 1


def test_unknown_kind_lists_kinds():
    with pytest.raises(ValueError) as info:
        make_case("moebius")
    for k in KINDS:
        assert k in str(info.value)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        make_case("cylinder", phi_max=3.0)
    with pytest.raises(ValueError):
        make_case("tangent_strip", width=0.95)
