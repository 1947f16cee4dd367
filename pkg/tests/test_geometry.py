import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigloc.geometry import (ConvexBody, DegenerateBodyError, JohnEllipsoid, body_from_halfspaces,
                             body_from_vertices, contains, contains_many, convex_hull,
                             cross_section, format_body, john_ellipsoid, parse_body, radii,
                             support_width, to_john_frame)
from eigloc.zoo import make_box, random_polytope

from conftest import rotation2


def test_box_forms_agree():
    box = make_box([4, 1])
    a, b = box.H
    again = body_from_halfspaces(a, b)
    assert sorted(map(tuple, np.round(again.V, 12))) == sorted(map(tuple, np.round(box.V, 12)))
    assert contains(box, [2, 0.5])
    assert not contains(box, [4.1, 0.5])
    assert contains_many(box, [[0, 0], [5, 5]]).tolist() == [True, False]


def test_support_width_and_radii():
    box = make_box([4, 1])
    assert support_width(box, [1, 0]) == pytest.approx(4)
    d = np.array([1, 1]) / math.sqrt(2)
    assert support_width(box, d) == pytest.approx(5 / math.sqrt(2))
    with pytest.raises(ValueError):
        support_width(box, [1, 1])
    inr, diam = radii(box)
    assert inr == pytest.approx(0.5)
    assert diam == pytest.approx(math.hypot(4, 1))


def test_cross_section_of_box():
    box = make_box([8, 2, 1])
    sec = cross_section(box, [0], [3.0])
    assert sec.dim == 2
    assert np.ptp(sec.V, axis=0) == pytest.approx([2, 1])
    assert cross_section(box, [0], [9.0]) is None


def test_john_box_is_centered_half_lengths():
    ell = john_ellipsoid(make_box([4, 1]))
    assert ell.center == pytest.approx([2, 0.5], abs=1e-8)
    assert ell.semi_axes == pytest.approx([2, 0.5], rel=1e-7)
    assert abs(ell.directions[0] @ [1, 0]) == pytest.approx(1, abs=1e-8)


def test_john_triangle_is_steiner_inellipse():
    # maximal inscribed ellipse of a triangle: centroid, area pi T / (3 sqrt 3)
    pts = np.array([[0, 0], [3, 0], [1, 2]], dtype=float)
    ell = john_ellipsoid(body_from_vertices(pts))
    area = 3.0
    assert ell.center == pytest.approx(pts.mean(axis=0), abs=1e-7)
    assert np.prod(ell.semi_axes) == pytest.approx(area / (3 * math.sqrt(3)), rel=1e-7)
    # the Steiner inellipse touches each edge at its midpoint
    mids = (pts + np.roll(pts, -1, axis=0)) / 2
    assert ell.gauge(mids) == pytest.approx(1, abs=1e-6)


def test_john_regular_simplex_is_inball():
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    body = body_from_vertices(v)
    ell = john_ellipsoid(body)
    inr = body.chebyshev[1]
    assert ell.semi_axes == pytest.approx([inr] * 3, rel=1e-6)
    assert ell.center == pytest.approx([0, 0, 0], abs=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(0, 10**6))
def test_john_sandwich_random(n, seed):
    body = random_polytope(n, 8 + seed % 20, seed)
    ell = john_ellipsoid(body)
    a, b = body.H
    B = ell.shape_matrix
    slack = a @ ell.center + np.linalg.norm(a @ B, axis=1) - b
    assert slack.max() <= 1e-6 * max(1.0, np.abs(b).max())
    assert ell.gauge(body.V).max() <= n * (1 + 1e-6)
    assert np.all(np.diff(ell.semi_axes) <= 1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * math.pi), st.integers(0, 1000))
def test_john_rotation_invariant(angle, seed):
    body = random_polytope(2, 9, seed)
    rot = rotation2(angle)
    turned = body.transformed(rot, np.array([1.5, -0.5]))
    e1, e2 = john_ellipsoid(body), john_ellipsoid(turned)
    assert e2.semi_axes == pytest.approx(e1.semi_axes, rel=1e-6)
    assert e2.center == pytest.approx(rot @ e1.center + [1.5, -0.5], abs=1e-6)


def test_to_john_frame_normalizes():
    body = make_box([4, 1]).transformed(rotation2(0.3), np.array([1.0, 2.0]))
    framed, frame, lengths = to_john_frame(body)
    assert lengths == pytest.approx([4, 1], rel=1e-7)
    assert john_ellipsoid(framed).center == pytest.approx([0, 0], abs=1e-7)
    pts = np.array([[0.3, 0.1], [2.0, 1.0]])
    assert frame.inverse(frame.forward(pts)) == pytest.approx(pts)


def test_estimator_matches_function():
    body = random_polytope(2, 12, 3)
    est = JohnEllipsoid().fit(body.V)
    ell = john_ellipsoid(body)
    assert est.lengths_ == pytest.approx(ell.semi_axes / ell.semi_axes[-1], rel=1e-6)
    out = est.transform(body.V)
    assert est.inverse_transform(out) == pytest.approx(body.V)


def test_text_roundtrip():
    body = random_polytope(3, 14, 7)
    again = parse_body(format_body(body))
    assert np.array_equal(again.V, body.V)
    assert np.array_equal(again.H[0], body.H[0])
    assert np.array_equal(again.H[1], body.H[1])


def test_degenerate_inputs_raise():
    with pytest.raises(DegenerateBodyError):
        convex_hull([[0, 0], [1, 1], [2, 2]])
    with pytest.raises(DegenerateBodyError):
        ConvexBody(2)
    with pytest.raises(ValueError):
        parse_body("vertices\n0 0\n")
