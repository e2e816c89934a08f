import json

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from devfill import io
from devfill.bitangency import eval_D, grad_D
from devfill.curve import BoundaryCurve
from devfill.errors import CurveFormatError, SimplicityViolation
from devfill.ruling import canonical, coverage_defect, mirror, wrap

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])

coef = st.floats(-0.25, 0.25, allow_nan=False)


@st.composite
def fourier_curves(draw):
    """Perturbed circle lifted by a few random harmonics."""
    a = draw(st.lists(coef, min_size=9, max_size=9))
    t = 2 * np.pi * np.arange(96) / 96
    x = np.cos(t) + a[0] * np.cos(2 * t) + a[1] * np.sin(3 * t)
    y = np.sin(t) + a[2] * np.sin(2 * t) + a[3] * np.cos(3 * t)
    z = a[4] * np.sin(2 * t) + a[5] * np.cos(3 * t) + a[6] * np.sin(t) + 0.3 * np.sin(2 * t + a[7])
    try:
        return BoundaryCurve(np.stack([x, y, z], -1) * (1 + a[8]))
    except SimplicityViolation:
        assume(False)


@SETTINGS
@given(fourier_curves(), st.lists(st.floats(0, 1), min_size=2, max_size=2))
def test_D_symmetric_and_vanishes_on_diagonal(curve, st_):
    L = curve.length
    s, t = st_[0] * L, st_[1] * L
    assert abs(eval_D(curve, s, t) - eval_D(curve, t, s)) < 1e-10 * L**3
    assert eval_D(curve, s, s) == 0.0
    g_st = grad_D(curve, np.array([s]), np.array([t]))[0]
    g_ts = grad_D(curve, np.array([t]), np.array([s]))[0]
    assert np.allclose(g_st, g_ts[::-1], atol=1e-10 * L**2)


@SETTINGS
@given(fourier_curves(), st.lists(st.floats(-np.pi, np.pi), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_D_invariant_under_rigid_motion(curve, rotvec, shift):
    moved = curve.transformed(Rotation.from_rotvec(rotvec).as_matrix(), shift)
    s = np.linspace(0, curve.length, 17)
    t = s[::-1] * 0.7
    assert np.allclose(eval_D(moved, s, t), eval_D(curve, s, t), atol=1e-10 * curve.length**3)


@SETTINGS
@given(fourier_curves())
def test_curve_json_round_trip(curve):
    doc = io.dumps(io.curve_document(curve))
    pts, corners = io.parse_curve_json(doc)
    again = BoundaryCurve(pts, corners)
    s = np.linspace(0, curve.length, 50, endpoint=False)
    assert np.abs(again.evaluate(s) - curve.evaluate(s)).max() < 1e-12
    assert io.dumps(io.curve_document(again)) == doc


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_json_parser_fails_cleanly(text):
    try:
        pts, corners = io.parse_curve_json(text)
    except CurveFormatError:
        return
    assert pts.shape[1] == 3


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="0123456789.,-e \n#xyz", max_size=200))
def test_csv_parser_fails_cleanly(text):
    try:
        pts, corners = io.parse_curve_csv(text)
    except CurveFormatError:
        return
    assert pts.shape[1] == 3
    assert all(0 <= c < len(pts) for c in corners)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(0.1, 100))
def test_wrap_range(x, L):
    w = wrap(x, L)
    assert -L / 2 - 1e-9 * L <= w <= L / 2 + 1e-9 * L
    assert abs((x - w) / L - round((x - w) / L)) < 1e-6


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.45), st.floats(0, 1), st.integers(-2, 2))
def test_canonical_orientation(frac, start, turns):
    # a straight monotone path with pinch ends; canonical form is mirror- and shift-independent
    L = 1.0
    m0 = start
    m1 = m0 + 0.5
    n = 11
    s = np.linspace(m0, m1, n)
    t = np.linspace(m0, m1 - L, n)
    P = np.stack([s, t], -1) + turns * L
    a, b = canonical(P, L), canonical(mirror(P), L)
    assert np.allclose(a, b)
    assert 0 <= a[0, 0] < L and 0 <= a[0, 1] < L
    assert np.allclose(mirror(mirror(P)), P)
    assert coverage_defect(a, L) < 1e-12


def test_json_output_is_plain_and_sorted():
    text = io.dumps({"b": np.float64(1.5), "a": [np.int64(2), np.nan, np.inf], "c": np.array([1.0, 2.0])})
    assert json.loads(text) == {"a": [2, None, None], "b": 1.5, "c": [1.0, 2.0]}
    assert text.index('"a"') < text.index('"b"')


def test_invalid_json_values():
    with pytest.raises(CurveFormatError, match=r"points\[1\]\[2\]"):
        io.parse_curve_json('{"points": [[0, 0, 0], [1, 2, "x"]]}')
    with pytest.raises(CurveFormatError, match="corners"):
        io.parse_curve_json('{"points": [[0, 0, 0]], "corners": [5]}')
