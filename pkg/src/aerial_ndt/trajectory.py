"""Minimum-snap piecewise-polynomial trajectories through waypoints.

Each position axis is a degree-9 polynomial per segment, parameterized in
normalized segment time ``tau = t / T_i`` in [0, 1] to keep the constraint
system well scaled. Yaw is planned separately as one quintic per segment.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LimitUnreachable, SolverSingular
from .kernels import wrap_angle

DEGREE = 9
N_COEF = DEGREE + 1
MIN_DURATION = 0.1
CHECK_RATE = 100.0


@dataclass(frozen=True)
class ReferenceSetpoint:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    yaw: float = 0.0
    yaw_rate: float = 0.0
    t: float = 0.0

    @classmethod
    def hold(cls, p, yaw=0.0, t=0.0):
        return cls(np.array(p, dtype=float), np.zeros(3), np.zeros(3), float(yaw), 0.0, t)


@dataclass
class Waypoint:
    p: np.ndarray
    yaw: float = 0.0
    v: np.ndarray | None = None
    a: np.ndarray | None = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if not np.all(np.isfinite(self.p)) or not math.isfinite(self.yaw):
            raise ValueError("waypoint must be finite")


@dataclass
class TrajectoryLimits:
    max_vel: float = 0.5
    max_acc: float = 0.25
    max_yaw_rate: float = 1.0

    def __post_init__(self):
        if self.max_vel <= 0 or self.max_acc <= 0 or self.max_yaw_rate <= 0:
            raise ValueError("trajectory limits must be positive")


@dataclass(frozen=True)
class Trajectory:
    durations: np.ndarray
    coeffs: np.ndarray  # (segments, 3, N_COEF), normalized time
    yaw_start: np.ndarray
    yaw_delta: np.ndarray
    knots: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "knots", np.concatenate([[0.0], np.cumsum(self.durations)]))

    @property
    def total_duration(self):
        return float(self.knots[-1])

    @property
    def n_segments(self):
        return len(self.durations)

    def segment_derivative(self, i, tau, order):
        """Physical ``order``-th derivative of segment ``i`` at normalized times ``tau``."""
        B = _basis(np.atleast_1d(tau), order)
        return (B @ self.coeffs[i].T) / self.durations[i] ** order


def _falling(k, r):
    out = 1.0
    for j in range(r):
        out *= k - j
    return out


def _basis(tau, order):
    """Rows of d^order/dtau^order [1, tau, ..., tau^9]."""
    tau = np.asarray(tau, dtype=float)
    B = np.zeros((tau.size, N_COEF))
    for k in range(order, N_COEF):
        B[:, k] = _falling(k, order) * tau ** (k - order)
    return B


def _snap_cost():
    Q = np.zeros((N_COEF, N_COEF))
    for j in range(4, N_COEF):
        for k in range(4, N_COEF):
            Q[j, k] = _falling(j, 4) * _falling(k, 4) / (j + k - 7)
    return Q


_Q_UNIT = _snap_cost()


def allocate_times(waypoints, max_vel=0.5, max_acc=0.25, max_yaw_rate=None):
    """Segment durations of a rest-to-rest trapezoidal velocity profile.

    With ``max_yaw_rate`` a segment is also long enough for its quintic yaw
    blend, whose peak rate is 15/8 of the mean rate.
    """
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    out = []
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        length = float(np.linalg.norm(b.p - a.p))
        if length >= max_vel ** 2 / max_acc:
            T = length / max_vel + max_vel / max_acc
        else:
            T = 2.0 * math.sqrt(length / max_acc)
        if max_yaw_rate is not None:
            T = max(T, 1.875 * abs(wrap_angle(b.yaw - a.yaw)) / max_yaw_rate)
        out.append(max(T, MIN_DURATION))
    return out


def _constraints(waypoints, T):
    n = len(T)
    rows, rhs = [], []

    def row(entries, value):
        r = np.zeros(n * N_COEF)
        for seg, vec in entries:
            r[seg * N_COEF:(seg + 1) * N_COEF] += vec
        rows.append(r)
        rhs.append(value)

    start, end = waypoints[0], waypoints[-1]
    zero = np.zeros(3)
    start_d = [start.v if start.v is not None else zero, start.a if start.a is not None else zero, zero]
    end_d = [end.v if end.v is not None else zero, end.a if end.a is not None else zero, zero]

    for i in range(n):
        row([(i, _basis(0.0, 0)[0])], waypoints[i].p)
        row([(i, _basis(1.0, 0)[0])], waypoints[i + 1].p)
    for r in range(1, 4):
        # scaled by T^r so every row is O(1)
        row([(0, _basis(0.0, r)[0])], np.asarray(start_d[r - 1], dtype=float) * T[0] ** r)
        row([(n - 1, _basis(1.0, r)[0])], np.asarray(end_d[r - 1], dtype=float) * T[-1] ** r)
    for i in range(n - 1):
        for r in range(1, 5):
            ratio = (T[i] / T[i + 1]) ** r
            row([(i, _basis(1.0, r)[0]), (i + 1, -ratio * _basis(0.0, r)[0])], zero)
    return np.array(rows), np.array(rhs)


def _solve_min_snap(waypoints, T):
    A, b = _constraints(waypoints, T)
    U, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > s[0] * 1e-12))
    if rank < A.shape[0]:
        raise SolverSingular(f"constraint system is rank deficient ({rank} < {A.shape[0]})")
    c_part = Vt[:rank].T @ ((U[:, :rank].T @ b) / s[:rank, None])
    N = Vt[rank:].T
    n = len(T)
    Tref = float(np.mean(T))
    Q = np.zeros((n * N_COEF, n * N_COEF))
    for i in range(n):
        Q[i * N_COEF:(i + 1) * N_COEF, i * N_COEF:(i + 1) * N_COEF] = _Q_UNIT * (Tref / T[i]) ** 7
    if N.shape[1]:
        H = N.T @ Q @ N
        z = np.linalg.lstsq(H, -N.T @ Q @ c_part, rcond=None)[0]
        c = c_part + N @ z
    else:
        c = c_part
    # iterative refinement: the cost step leaves rounding residue in the constraints
    # that short segments amplify by 1/T^r
    for _ in range(2):
        c = c + Vt[:rank].T @ ((U[:, :rank].T @ (b - A @ c)) / s[:rank, None])
    return c.T.reshape(3, n, N_COEF).transpose(1, 0, 2)


def _yaw_profile(waypoints):
    starts, deltas = [], []
    y = waypoints[0].yaw
    for wp in waypoints[1:]:
        d = wrap_angle(wp.yaw - y)
        starts.append(y)
        deltas.append(d)
        y += d
    return np.array(starts), np.array(deltas)


def peak_rates(traj, rate=CHECK_RATE):
    vmax = amax = 0.0
    for i in range(traj.n_segments):
        n = max(2, int(math.ceil(traj.durations[i] * rate)) + 1)
        tau = np.linspace(0.0, 1.0, n)
        vmax = max(vmax, float(np.max(np.linalg.norm(traj.segment_derivative(i, tau, 1), axis=1))))
        amax = max(amax, float(np.max(np.linalg.norm(traj.segment_derivative(i, tau, 2), axis=1))))
    return vmax, amax


def plan(waypoints, limits=None, max_scalings=5):
    """Plan a minimum-snap trajectory and stretch it in time until it meets the limits."""
    limits = TrajectoryLimits() if limits is None else limits
    waypoints = list(waypoints)
    T = np.array(allocate_times(waypoints, limits.max_vel, limits.max_acc, limits.max_yaw_rate))
    yaw_start, yaw_delta = _yaw_profile(waypoints)
    for attempt in range(max_scalings + 1):
        traj = Trajectory(T.copy(), _solve_min_snap(waypoints, T), yaw_start, yaw_delta)
        vmax, amax = peak_rates(traj)
        rv = vmax / limits.max_vel
        ra = amax / limits.max_acc
        if rv <= 1.01 and ra <= 1.01:
            return traj
        if attempt == max_scalings:
            break
        T = T * max(rv, math.sqrt(ra))
    raise LimitUnreachable(f"limits still exceeded after {max_scalings} time scalings")


def _smoothstep(tau, order):
    if order == 0:
        return tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau ** 2)
    return 30.0 * tau ** 2 * (1.0 - tau) ** 2


def sample(traj, t):
    """Reference at time ``t``; clamped to the trajectory span."""
    t = float(t)
    if t >= traj.total_duration:
        i, tau = traj.n_segments - 1, 1.0
        p = traj.segment_derivative(i, tau, 0)[0]
        yaw = traj.yaw_start[-1] + traj.yaw_delta[-1]
        return ReferenceSetpoint(p, np.zeros(3), np.zeros(3), wrap_angle(yaw), 0.0, t)
    t = max(t, 0.0)
    i = int(np.searchsorted(traj.knots, t, side="right") - 1)
    i = min(max(i, 0), traj.n_segments - 1)
    T = traj.durations[i]
    tau = (t - traj.knots[i]) / T
    B = np.vstack([_basis(tau, r) for r in range(3)])
    pva = (B @ traj.coeffs[i].T) / np.array([1.0, T, T * T])[:, None]
    yaw = traj.yaw_start[i] + traj.yaw_delta[i] * _smoothstep(tau, 0)
    yaw_rate = traj.yaw_delta[i] * _smoothstep(tau, 1) / T
    return ReferenceSetpoint(pva[0], pva[1], pva[2], wrap_angle(yaw), float(yaw_rate), t)


def junction_residual(traj, max_order=4):
    """Largest derivative mismatch (orders 0..max_order) across interior knots."""
    worst = 0.0
    for i in range(traj.n_segments - 1):
        for r in range(max_order + 1):
            left = traj.segment_derivative(i, 1.0, r)[0]
            right = traj.segment_derivative(i + 1, 0.0, r)[0]
            worst = max(worst, float(np.max(np.abs(left - right))))
    return worst
