import numpy as np
import pytest

from devfill.ruling import SolverConfig, build_surface, validate_candidate
from devfill.surface import (DevelopableSurface, Mesh, check_embedded, grid_mesh, hausdorff_distance, mesh,
                             point_triangle_distance, sample_mean_curvature, singular_rulings,
                             validate_developable)


def _brute_triangle_distance(p, a, b, c, n=400):
    # dense barycentric sampling; an upper bound within the grid spacing
    u, v = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n))
    m = u + v <= 1
    u, v = u[m], v[m]
    Q = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    return np.linalg.norm(Q - p, axis=1).min()


def test_point_triangle_distance_against_sampling(rng):
    for _ in range(40):
        a, b, c = rng.normal(size=(3, 3))
        p = rng.normal(size=3) * 2
        d = point_triangle_distance(p, a, b, c)
        brute = _brute_triangle_distance(p, a, b, c)
        assert d <= brute + 1e-12
        assert brute - d < 5e-3 * max(np.linalg.norm(b - a), np.linalg.norm(c - a))


def test_point_triangle_distance_regions():
    a, b, c = np.array([0.0, 0, 0]), np.array([1.0, 0, 0]), np.array([0.0, 1, 0])
    assert point_triangle_distance(np.array([0.2, 0.2, 0.7]), a, b, c) == pytest.approx(0.7)
    assert point_triangle_distance(np.array([-1.0, -1, 0]), a, b, c) == pytest.approx(np.sqrt(2))
    assert point_triangle_distance(np.array([0.5, -2, 0]), a, b, c) == pytest.approx(2.0)
    assert point_triangle_distance(np.array([1.0, 1, 0]), a, b, c) == pytest.approx(np.sqrt(0.5))


def test_hausdorff_of_offset_plane():
    x, y = np.meshgrid(np.linspace(0, 1, 11), np.linspace(0, 1, 7), indexing="ij")
    pts = np.stack([x, y, 0 * x], -1).reshape(-1, 3)
    m1 = grid_mesh(pts, 11, 7)
    m2 = grid_mesh(pts + [0, 0, 0.03], 11, 7)
    assert hausdorff_distance(m1, m1) < 1e-15
    assert hausdorff_distance(m1, m2) == pytest.approx(0.03, rel=1e-12)


def test_cylinder_mean_curvature_closed_form(solved, case):
    # [DERIVED] a cylinder of radius r has |H| = 1 / (2 r) everywhere
    c = case("cylinder")
    surf = solved("cylinder").surfaces[0]
    H = sample_mean_curvature(surf)
    assert len(H) > 0
    assert np.abs(np.abs(H) - c.closed_form_abs_H).max() < 1e-6


@pytest.mark.parametrize("kind", ["cylinder", "tangent_strip", "two_solution"])
def test_residuals_small(solved, kind):
    for surf in solved(kind).surfaces:
        res = validate_developable(surf)
        assert res.passed
        assert res.developability < 1e-5
        assert res.normal_variation < 1e-5
        assert len(singular_rulings(surf)) == 0
        assert check_embedded(surf)
        assert surf.min_ruling_gap > 1e-6


def test_shifted_correspondence_fails_validation(solved):
    surf = solved("tangent_strip").surfaces[0]
    P = surf.path.copy()
    L = surf.curve.length
    P[:, 1] += 0.01 * L * np.sin(np.linspace(0, np.pi, len(P)))
    bad = build_surface(surf.curve, P)
    assert validate_candidate(bad, SolverConfig()) is not None
    assert not validate_developable(bad).passed


def test_mesh_orientation_and_obj(tmp_path, solved):
    surf = solved("cylinder").surfaces[0]
    m = mesh(surf, (40, 6))
    assert m.vertices.shape == (240, 3)
    V, F = m.vertices, m.faces
    fn = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
    # adjacent strips share one orientation
    strips = fn.reshape(39, -1, 3).sum(1)
    assert np.all((strips[1:] * strips[:-1]).sum(-1) > 0)
    m.write_obj(tmp_path / "s.obj")
    lines = (tmp_path / "s.obj").read_text().splitlines()
    vs = [l for l in lines if l.startswith("v ")]
    fs = [l for l in lines if l.startswith("f ")]
    assert len(vs) == 240 and len(fs) == len(F)
    idx = np.array([[int(x) for x in l.split()[1:]] for l in fs])
    assert idx.min() == 1 and idx.max() == 240


def test_mesh_normals_face_stored_normals(solved):
    surf = solved("two_solution").surfaces[0]
    m = mesh(surf, (32, 4))
    V, F = m.vertices, m.faces
    fn = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
    fn /= np.linalg.norm(fn, axis=1)[:, None]
    ref = surf.normals[len(surf.normals) // 2]
    centre = fn[(len(F) // 2) - 2:(len(F) // 2) + 2].mean(0)
    assert np.dot(centre, ref) > 0.9


def test_mesh_matches_truth(solved, case):
    c = case("cylinder")
    surf = solved("cylinder").surfaces[0]
    truth = c.truth_meshes(400, 16)[0]
    assert hausdorff_distance(mesh(surf, (256, 16)), truth) < 1e-3 * c.boundary.length


def test_transformed_surface_keeps_path(solved):
    surf = solved("cylinder").surfaces[0]
    R = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]])
    moved = surf.transformed(surf.curve.transformed(R))
    assert isinstance(moved, DevelopableSurface)
    assert np.array_equal(moved.path, surf.path)
    assert np.allclose(moved.rulings, surf.rulings @ R.T, atol=1e-12)


def test_obj_writer_precision(tmp_path):
    m = Mesh(np.array([[0.1, 1 / 3, 2.0], [1, 0, 0], [0, 1, 0]]), np.array([[0, 1, 2]]))
    m.write_obj(tmp_path / "t.obj")
    first = (tmp_path / "t.obj").read_text().splitlines()[0]
    assert first == "v 0.1 0.333333333333 2"
