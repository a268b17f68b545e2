import math

import numpy as np
import pytest
from _refs import circle, s_curve, straight
from hypothesis import given
from hypothesis import strategies as st

from frenetdrive.errors import ConversionError, DegenerateInputError, FrenetRangeError, InputError
from frenetdrive.frenet import (FrenetState, build_reference, cartesian_to_frenet, extended_waypoints,
                                frenet_to_cartesian, realize_trajectory, wrap_angle)
from frenetdrive.polynomial import solve_quartic, solve_quintic

CIRCLE = circle()
SCURVE = s_curve()
LINE = straight()


def test_straight_reference_geometry():
    assert LINE.total_length == pytest.approx(100.0, abs=1e-9)
    assert np.allclose(LINE.heading, 0.0)
    assert np.allclose(LINE.curvature, 0.0, atol=1e-12)
    assert np.all(np.diff(LINE.s) <= 0.5 + 1e-12)


def test_circle_reference_geometry():
    assert CIRCLE.total_length == pytest.approx(10 * 1.5 * math.pi, rel=1e-4)
    mid = slice(len(CIRCLE) // 10, -len(CIRCLE) // 10)
    assert np.allclose(CIRCLE.curvature[mid], 0.1, rtol=2e-3)
    x, y, th, k, _ = CIRCLE.interpolate(np.array([5.0]))
    assert math.hypot(x[0], y[0] - 10.0) == pytest.approx(10.0, abs=1e-3)


def test_left_offset_is_positive():
    x, y, th, v, a, k = frenet_to_cartesian(LINE, FrenetState(s=10.0, s_dot=2.0, d=1.5))
    assert (x, y) == pytest.approx((10.0, 1.5))
    assert th == pytest.approx(0.0) and v == pytest.approx(2.0)
    s = cartesian_to_frenet(LINE, (20.0, -2.0, 0.0, 1.0, 0.0))
    assert s.s == pytest.approx(20.0) and s.d == pytest.approx(-2.0)


def test_speed_on_circle_scales_with_offset():
    # inside a left-hand bend the path is shorter: v = s_dot * (1 - kappa d)
    st_ = FrenetState(s=8.0, s_dot=5.0, d=2.0)
    v = frenet_to_cartesian(CIRCLE, st_)[3]
    assert v == pytest.approx(5.0 * (1 - 0.1 * 2.0), rel=2e-3)


@pytest.mark.parametrize("ref", [LINE, CIRCLE, SCURVE], ids=["straight", "circle", "scurve"])
@given(u=st.floats(0.05, 0.95), d=st.floats(-2.0, 2.0))
def test_position_round_trip(ref, u, d):
    s = u * ref.total_length
    x, y, th, *_ = frenet_to_cartesian(ref, FrenetState(s=s, s_dot=1.0, d=d))
    back = cartesian_to_frenet(ref, (x, y, th, 1.0, 0.0))
    assert abs(back.s - s) < 1e-6 and abs(back.d - d) < 1e-6


@pytest.mark.parametrize("ref", [CIRCLE, SCURVE], ids=["circle", "scurve"])
@given(u=st.floats(0.1, 0.9), d=st.floats(-2.0, 2.0), sd=st.floats(0.5, 15.0), sdd=st.floats(-3, 3),
       dd=st.floats(-1.5, 1.5), ddd=st.floats(-2, 2))
def test_full_state_round_trip(ref, u, d, sd, sdd, dd, ddd):
    state = FrenetState(u * ref.total_length, sd, sdd, d, dd, ddd)
    x, y, th, v, a, k = frenet_to_cartesian(ref, state)
    back = cartesian_to_frenet(ref, (x, y, th, v, a), kappa=k)
    assert np.allclose([back.s, back.s_dot, back.s_ddot, back.d, back.d_dot, back.d_ddot],
                       [state.s, sd, sdd, d, dd, ddd], atol=1e-5)


def test_kinematics_match_finite_differences():
    lat = solve_quintic((0.5, 0.0, 0.0), (-1.0, 0.0, 0.0), 4.0)
    lon = solve_quartic((2.0, 6.0, 0.0), (9.0, 0.0), 4.0)
    tr = realize_trajectory(SCURVE, lat, lon, 0.001)
    assert tr.feasible
    dt = tr.dt
    vx, vy = np.gradient(tr.x, dt), np.gradient(tr.y, dt)
    inner = slice(5, -5)
    assert np.allclose(np.hypot(vx, vy)[inner], tr.v[inner], atol=1e-3)
    # integral form: pointwise differences pick up the per-segment spline ripple
    dv = np.concatenate([[0.0], np.cumsum(0.5 * (tr.a[1:] + tr.a[:-1]) * dt)])
    assert np.allclose(tr.v - tr.v[0], dv, atol=2e-3)
    heading = np.unwrap(tr.theta)
    kappa = np.gradient(heading, dt) / tr.v
    assert np.allclose(kappa[inner], tr.kappa[inner], atol=1e-3)


def test_projection_outside_corridor():
    with pytest.raises(FrenetRangeError):
        cartesian_to_frenet(LINE, (50.0, 60.0, 0.0, 1.0, 0.0))


def test_offset_beyond_centre_of_curvature():
    with pytest.raises(ConversionError):
        frenet_to_cartesian(CIRCLE, FrenetState(s=8.0, s_dot=1.0, d=10.5))


def test_s_outside_reference():
    with pytest.raises(ConversionError):
        frenet_to_cartesian(LINE, FrenetState(s=101.0))


def test_bad_waypoints():
    with pytest.raises(DegenerateInputError):
        build_reference([(0, 0)])
    with pytest.raises(DegenerateInputError):
        build_reference([(0, 0), (0, 0), (1, 0)])
    with pytest.raises(InputError):
        build_reference([(0, 0), (1, 0)], ds=0.0)
    with pytest.raises(InputError):
        build_reference([(0, 0), (math.nan, 0)])


def test_extended_waypoints_pad_straight():
    pts = extended_waypoints([(0, 0), (10, 0)], back=5, ahead=12, spacing=5)
    assert pts[0] == pytest.approx((-5.0, 0.0))
    assert pts[-1] == pytest.approx((22.0, 0.0))
    assert all(y == 0 for _, y in pts)


@given(st.floats(-100, 100))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_trajectory_state_and_frenet_access():
    lat = solve_quintic((0, 0, 0), (1, 0, 0), 3.0)
    lon = solve_quintic((0, 5, 0), (15, 5, 0), 3.0)
    tr = realize_trajectory(LINE, lat, lon, 0.1)
    assert len(tr.t) == 31 and tr.dt == pytest.approx(0.1)
    x, y, *_ = tr.state_at(1.55)
    assert x == pytest.approx(0.5 * (tr.x[15] + tr.x[16]))
    assert tr.state_at(99.0) == tuple(tr.points[-1, 1:])
    f = tr.frenet_at(3.0)
    assert f.s == pytest.approx(15.0) and f.d == pytest.approx(1.0)


def test_reversing_profile_is_infeasible():
    lat = solve_quintic((0, 0, 0), (0, 0, 0), 2.0)
    lon = solve_quintic((10, 1, 0), (5, 0, 0), 2.0)
    assert not realize_trajectory(LINE, lat, lon, 0.1).feasible
