import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aerial_ndt.errors import LimitUnreachable
from aerial_ndt.trajectory import (MIN_DURATION, Trajectory, TrajectoryLimits, Waypoint, allocate_times,
                                   junction_residual, peak_rates, plan, sample, _solve_min_snap, _yaw_profile)

LIM = TrajectoryLimits()


def wps(*points, yaws=None):
    yaws = yaws or [0.0] * len(points)
    return [Waypoint(np.array(p, dtype=float), y) for p, y in zip(points, yaws)]


def dense(traj, dt=0.002):
    t = np.arange(0.0, traj.total_duration + dt, dt)
    pts = [sample(traj, ti) for ti in t]
    return t, np.array([s.p for s in pts]), np.array([s.v for s in pts]), np.array([s.a for s in pts])


class TestAllocate:
    def test_triangular(self):
        assert allocate_times(wps([0, 0, 0], [1, 0, 0]), 0.5, 0.25) == [pytest.approx(4.0)]

    def test_floor(self):
        assert allocate_times(wps([0, 0, 0], [0, 0, 0]), 0.5, 0.25) == [MIN_DURATION]

    def test_trapezoidal(self):
        assert allocate_times(wps([0, 0, 0], [10, 0, 0]), 0.5, 0.25) == [pytest.approx(22.0)]

    def test_yaw_rate_stretch(self):
        T = allocate_times(wps([0, 0, 0], [0, 0, 0], yaws=[0.0, 1.0]), 0.5, 0.25, max_yaw_rate=1.0)
        assert T == [pytest.approx(1.875)]


class TestPlan:
    def test_identical_waypoints_constant(self):
        traj = plan(wps([1, 2, 3], [1, 2, 3]))
        _, p, v, a = dense(traj, 0.01)
        np.testing.assert_allclose(p, [[1, 2, 3]] * len(p), atol=1e-12)
        assert np.max(np.abs(v)) < 1e-9 and np.max(np.abs(a)) < 1e-9

    def test_straight_line_limits(self):
        traj = plan(wps([0, 0, 0], [1, 0, 0]))
        _, _, v, a = dense(traj)
        assert np.max(np.linalg.norm(v, axis=1)) <= 0.5 * 1.01
        assert np.max(np.linalg.norm(a, axis=1)) <= 0.25 * 1.01

    def test_start_and_end(self):
        traj = plan(wps([0, 0, 1], [1, 1, 1], [2, 0, 1]))
        s0 = sample(traj, 0.0)
        np.testing.assert_allclose(s0.p, [0, 0, 1], atol=1e-12)
        np.testing.assert_allclose(s0.v, 0.0, atol=1e-12)
        np.testing.assert_allclose(s0.a, 0.0, atol=1e-12)
        s_end = sample(traj, traj.total_duration + 10.0)
        np.testing.assert_allclose(s_end.p, [2, 0, 1], atol=1e-9)
        assert np.array_equal(s_end.v, np.zeros(3))

    def test_symmetric_midpoint(self):
        traj = plan(wps([0, 0, 0], [1, 0, 0]))
        mid = sample(traj, traj.total_duration / 2)
        np.testing.assert_allclose(mid.p, [0.5, 0, 0], atol=1e-12)
        _, _, v, _ = dense(traj, 0.0005)
        assert mid.v[0] == pytest.approx(np.max(v[:, 0]), rel=1e-6)
        assert abs(mid.a[0]) < 1e-9

    def test_interpolates_waypoints(self):
        pts = [[0, 0, 1], [0.5, 0.3, 1.2], [1.0, -0.2, 0.9], [1.4, 0.1, 1.0]]
        traj = plan(wps(*pts))
        for knot, p in zip(traj.knots, pts):
            np.testing.assert_allclose(sample(traj, knot).p, p, atol=1e-9)

    def test_velocity_is_derivative(self):
        traj = plan(wps([0, 0, 1], [0.7, 0.4, 1.3], [1.2, -0.3, 0.8]))
        h = 1e-4
        vmax = peak_rates(traj)[0]
        for t in np.linspace(0.05, traj.total_duration - 0.05, 40):
            fd = (sample(traj, t + h).p - sample(traj, t - h).p) / (2 * h)
            assert np.max(np.abs(fd - sample(traj, t).v)) <= 1e-6 * vmax

    def test_time_scaling_halves_speed(self):
        w = wps([0, 0, 0], [0.6, 0.2, 0.1], [1.1, -0.3, 0.4])
        T = np.array(allocate_times(w, 0.5, 0.25))
        a = Trajectory(T, _solve_min_snap(w, T), *_yaw_profile(w))
        b = Trajectory(2 * T, _solve_min_snap(w, 2 * T), *_yaw_profile(w))
        assert peak_rates(b)[0] == pytest.approx(peak_rates(a)[0] / 2, rel=0.05)

    def test_yaw_wraps_short_way(self):
        traj = plan(wps([0, 0, 0], [0, 0, 0], yaws=[3.0, -3.0]))
        end = sample(traj, traj.total_duration)
        assert end.yaw == pytest.approx(-3.0, abs=1e-12)
        peak = max(abs(sample(traj, t).yaw_rate) for t in np.linspace(0, traj.total_duration, 200))
        assert peak <= LIM.max_yaw_rate * 1.0001

    def test_unreachable(self):
        with pytest.raises(LimitUnreachable):
            plan(wps([0, 0, 0], [0.3, 0, 0], [0.3, 0.01, 0], [0, 0, 0]), TrajectoryLimits(0.5, 0.25), max_scalings=0)


def random_waypoints(rng):
    n = rng.integers(2, 6)
    pts = np.cumsum(rng.uniform(-1.0, 1.0, (n, 3)), axis=0)
    return [Waypoint(p, rng.uniform(-math.pi, math.pi)) for p in pts]


@pytest.mark.parametrize("seed", range(20))
def test_seeded_random_sets_meet_limits(seed):
    traj = plan(random_waypoints(np.random.default_rng(seed)))
    _, _, v, a = dense(traj, 0.005)
    assert np.max(np.linalg.norm(v, axis=1)) <= 0.505
    assert np.max(np.linalg.norm(a, axis=1)) <= 0.2525
    assert junction_residual(traj) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.lists(st.lists(st.floats(-2, 2), min_size=3, max_size=3), min_size=2, max_size=5))
def test_junction_continuity(points):
    traj = plan(wps(*points))
    assert junction_residual(traj) <= 1e-9


def test_invalid():
    with pytest.raises(ValueError):
        TrajectoryLimits(max_vel=0.0)
    with pytest.raises(ValueError):
        Waypoint(np.array([np.nan, 0, 0]))
    with pytest.raises(ValueError):
        allocate_times(wps([0, 0, 0]))
