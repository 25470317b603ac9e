import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hitmap.errors import FrameMismatch
from hitmap.geometry import Frame, Pose2, wrap_angle

from oracles import compose

coord = st.floats(-50, 50, allow_nan=False)
angle = st.floats(-10, 10, allow_nan=False)
poses = st.builds(Pose2, coord, coord, angle)


@given(angle)
def test_wrap_angle_range(theta):
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-9)


def test_wrap_angle_pi_maps_to_pi():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi


@given(poses, poses)
def test_compose_matches_hand_formula(a, b):
    got = a.compose(b)
    x, y, t = compose((a.x, a.y, a.theta), (b.x, b.y, b.theta))
    assert got.x == pytest.approx(x, abs=1e-9)
    assert got.y == pytest.approx(y, abs=1e-9)
    assert math.cos(got.theta - t) == pytest.approx(1.0, abs=1e-9)


@given(poses)
def test_inverse_is_identity(p):
    e = p.compose(p.inverse())
    assert (e.x, e.y) == pytest.approx((0.0, 0.0), abs=1e-9)
    assert abs(wrap_angle(e.theta)) < 1e-9


@given(poses, poses)
def test_relative_roundtrip(a, b):
    r = a.relative(b)
    back = a.compose(r)
    assert (back.x, back.y) == pytest.approx((b.x, b.y), abs=1e-8)


@given(poses, st.lists(st.tuples(coord, coord), min_size=1, max_size=10))
def test_transform_points_roundtrip(p, pts):
    pts = np.array(pts)
    out = p.inverse_transform_points(p.transform_points(pts))
    np.testing.assert_allclose(out, pts, atol=1e-9)


@given(poses, st.lists(st.tuples(coord, coord), min_size=2, max_size=8))
def test_transform_is_rigid(p, pts):
    pts = np.array(pts)
    q = p.transform_points(pts)
    d0 = np.hypot(*(pts[0] - pts[1:]).T)
    d1 = np.hypot(*(q[0] - q[1:]).T)
    np.testing.assert_allclose(d0, d1, atol=1e-9)


def test_frames_must_agree():
    a = Pose2(0, 0, 0, Frame.ODOMETRY)
    b = Pose2(1, 0, 0, Frame.CORRECTED)
    with pytest.raises(FrameMismatch):
        a.compose(b)
    with pytest.raises(FrameMismatch):
        a.distance(b)


def test_list_roundtrip():
    p = Pose2(1.5, -2.0, 0.3, Frame.CORRECTED)
    assert Pose2.from_list(p.to_list()) == p
