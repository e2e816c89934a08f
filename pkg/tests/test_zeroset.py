import numpy as np
import pytest
from scipy.spatial import cKDTree

from devfill.bitangency import eval_D, sample_field
from devfill.curve import BoundaryCurve
from devfill.errors import DegenerateField
from devfill.oracle import sample_loop, saddle_loop
from devfill.zeroset import END_BAND, END_CORNER, END_OPEN, extract_zero_set


@pytest.fixture(scope="module")
def cylinder_zero_set(case):
    c = case("cylinder").boundary
    return c, extract_zero_set(c, sample_field(c, 256))


def _all_vertices(zs):
    return np.concatenate([c.vertices for c in zs.curves])


def test_vertices_lie_on_zero_set(cylinder_zero_set):
    curve, zs = cylinder_zero_set
    V = _all_vertices(zs)
    assert np.abs(eval_D(curve, V[:, 0], V[:, 1])).max() < 1e-12 * curve.length**3
    assert not any(c.flagged for c in zs.curves)


def test_zero_set_is_mirror_symmetric(cylinder_zero_set):
    curve, zs = cylinder_zero_set
    V = _all_vertices(zs)
    d, _ = cKDTree(V).query(V[:, ::-1])
    assert d.max() < 1e-9 * curve.length


def test_known_correspondence_on_zero_set(case, cylinder_zero_set):
    # [DERIVED] the constructed ruling pairs must sit on some extracted contour
    curve, zs = cylinder_zero_set
    L = curve.length
    truth = case("cylinder").correspondences[0]
    inner = truth[np.abs(np.angle(np.exp(2j * np.pi * (truth[:, 0] - truth[:, 1]) / L))) > 2 * np.pi * 0.05]
    V = _all_vertices(zs)
    d, _ = cKDTree(V, boxsize=L).query(np.mod(inner, L))
    assert d.max() < 2 * zs.spacing


def test_curves_end_in_band_or_closed(cylinder_zero_set):
    _, zs = cylinder_zero_set
    assert len(zs.curves) >= 1
    for c in zs.curves:
        if not c.closed:
            assert END_OPEN not in c.ends
            assert set(c.ends) <= {END_BAND}


def test_component_count_stable_under_refinement(case):
    c = case("cylinder").boundary
    counts = [len(extract_zero_set(c, sample_field(c, n)).curves) for n in (256, 512)]
    assert counts[0] == counts[1]


def test_labels_are_classified(cylinder_zero_set):
    _, zs = cylinder_zero_set
    labels = {lab for c in zs.curves for lab in c.labels}
    assert "unrefined" not in labels


def test_planar_field_is_degenerate():
    theta = 2 * np.pi * np.arange(200) / 200
    circle = BoundaryCurve(np.stack([np.cos(theta), np.sin(theta), 0 * theta], -1))
    with pytest.raises(DegenerateField):
        extract_zero_set(circle, sample_field(circle, 64))


def test_corner_lines_terminate_contours():
    _, pts = sample_loop(saddle_loop, 400)
    curve = BoundaryCurve(pts, corners=[0, 130])
    zs = extract_zero_set(curve, sample_field(curve, 128))
    ends = [e for c in zs.curves for e in c.ends if e is not None]
    assert END_CORNER in ends
    assert len(zs.corner_params) == 2


def test_json_round_trip_fields(cylinder_zero_set):
    _, zs = cylinder_zero_set
    doc = zs.to_json()
    assert len(doc["curves"]) == len(zs.curves)
    assert doc["spacing"] == zs.spacing
