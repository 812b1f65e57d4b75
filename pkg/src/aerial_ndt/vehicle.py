"""Translational quadrotor dynamics, emulated inner loop and sensor readout."""
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels as K
from .errors import NonFiniteState

GRAVITY = 9.81
E3 = np.array([0.0, 0.0, 1.0])


def _default_axes():
    return np.tile(E3, (4, 1))


@dataclass
class VehicleParams:
    m: float = 2.3
    c_f: float = 1.0e-5
    rotor_axes: np.ndarray = field(default_factory=_default_axes)
    tau_att: float = 0.15
    tau_thrust: float = 0.05
    omega_max: float = 1500.0
    g: float = GRAVITY
    f_min: float = 0.1
    accel_cmd_max: float = 3.0 * GRAVITY

    def __post_init__(self):
        self.rotor_axes = np.asarray(self.rotor_axes, dtype=float).reshape(4, 3)
        if self.m <= 0 or self.c_f <= 0 or self.tau_att <= 0 or self.tau_thrust <= 0:
            raise ValueError("mass, thrust coefficient and lags must be positive")
        norms = np.linalg.norm(self.rotor_axes, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("rotor axes must be unit vectors")

    def as_array(self):
        vp = np.empty(K.N_VP)
        vp[K.VP_M] = self.m
        vp[K.VP_CF] = self.c_f
        vp[K.VP_TAU_ATT] = self.tau_att
        vp[K.VP_TAU_THRUST] = self.tau_thrust
        vp[K.VP_OMEGA_MAX] = self.omega_max
        vp[K.VP_G] = self.g
        vp[K.VP_F_MIN] = self.f_min
        vp[K.VP_ACC_MAX] = self.accel_cmd_max
        return vp

    def hover_speed(self, mass=None):
        m = self.m if mass is None else mass
        return np.sqrt(m * self.g / (4.0 * self.c_f))


@dataclass
class NoiseConfig:
    odom_p_sigma: float = 0.005
    odom_v_sigma: float = 0.01
    odom_att_sigma: float = 0.001
    imu_sigma: float = 0.05
    rotor_rel_sigma: float = 0.01

    @classmethod
    def noiseless(cls):
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass
class AccelYawRateCmd:
    accel_cmd: np.ndarray
    yaw_rate_cmd: float = 0.0

    def as_array(self):
        return np.array([*np.asarray(self.accel_cmd, dtype=float), float(self.yaw_rate_cmd)])


@dataclass
class VehicleState:
    """Simulated truth.

    Besides position, velocity, attitude and rotor speeds this carries the
    emulated flight controller's internal yaw setpoint and held thrust axis.
    """
    p: np.ndarray
    v: np.ndarray
    q: np.ndarray
    rotor_speeds: np.ndarray
    t: float = 0.0
    yaw_sp: float = 0.0
    b3_hold: np.ndarray = field(default_factory=lambda: E3.copy())
    acc: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def hover(cls, params, p=(0.0, 0.0, 0.0), yaw=0.0):
        w = np.full(4, params.hover_speed())
        q = K.quat_from_euler(yaw, 0.0, 0.0)
        return cls(np.array(p, dtype=float), np.zeros(3), q, w, 0.0, yaw)

    @property
    def R(self):
        return K.quat_to_rot(self.q)

    @property
    def psi(self):
        return K.quat_yaw(self.q)

    def to_array(self):
        xs = np.empty(K.N_STATE)
        xs[K.P:K.P + 3] = self.p
        xs[K.V:K.V + 3] = self.v
        xs[K.Q:K.Q + 4] = self.q
        xs[K.W:K.W + 4] = self.rotor_speeds
        xs[K.YAW_SP] = self.yaw_sp
        xs[K.B3:K.B3 + 3] = self.b3_hold
        xs[K.ACC:K.ACC + 3] = self.acc
        xs[K.TIME] = self.t
        return xs

    @classmethod
    def from_array(cls, xs):
        xs = np.asarray(xs, dtype=float)
        return cls(
            p=xs[K.P:K.P + 3].copy(),
            v=xs[K.V:K.V + 3].copy(),
            q=xs[K.Q:K.Q + 4].copy(),
            rotor_speeds=xs[K.W:K.W + 4].copy(),
            t=float(xs[K.TIME]),
            yaw_sp=float(xs[K.YAW_SP]),
            b3_hold=xs[K.B3:K.B3 + 3].copy(),
            acc=xs[K.ACC:K.ACC + 3].copy(),
        )


@dataclass
class SensorReadings:
    odom_p: np.ndarray
    odom_v: np.ndarray
    odom_R: np.ndarray
    imu_accel_body: np.ndarray
    rotor_speeds_meas: np.ndarray

    @property
    def odom_psi(self):
        return float(np.arctan2(self.odom_R[1, 0], self.odom_R[0, 0]))


def rotor_force_body(rotor_speeds, params):
    """Total rotor force in the body frame, ``sum c_f |w| w z_i``."""
    return K.rotor_force(np.asarray(rotor_speeds, dtype=float), params.c_f, params.rotor_axes)


def step_dynamics(state, f_ext_world, params, dt=1e-3):
    """Integrate the translational dynamics over one physics step.

    Attitude and rotor speeds are held; advance them with :func:`inner_loop`.
    """
    f_ext = np.asarray(f_ext_world, dtype=float)
    xs = state.to_array()
    K.dynamics_update(xs, f_ext, params.as_array(), params.rotor_axes, dt)
    if not np.all(np.isfinite(xs)):
        raise NonFiniteState("vehicle state became non-finite")
    return VehicleState.from_array(xs)


def inner_loop(cmd, state, params, dt=1e-3):
    """Advance the emulated flight controller one step toward ``cmd``.

    Returns the updated state; its ``rotor_speeds`` and ``R`` are the
    controller outputs. Commands above ``accel_cmd_max`` are clamped.
    """
    xs = state.to_array()
    K.inner_loop_update(xs, cmd.as_array(), params.as_array(), dt)
    return VehicleState.from_array(xs)


def specific_force_world(state, f_ext_world, params):
    f = state.R @ rotor_force_body(state.rotor_speeds, params) + np.asarray(f_ext_world, dtype=float)
    return f / params.m


def _small_rotation(rotvec):
    angle = np.linalg.norm(rotvec)
    if angle == 0.0:
        return np.eye(3)
    k = rotvec / angle
    Kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * Kx + (1.0 - np.cos(angle)) * Kx @ Kx


def sense(state, f_ext_world, params, noise, rng):
    """Noisy odometry, IMU specific force and rotor-speed readout."""
    z = rng.standard_normal(16)
    R = state.R
    imu = R.T @ specific_force_world(state, f_ext_world, params)
    odom_R = R
    if noise.odom_att_sigma > 0.0:
        odom_R = R @ _small_rotation(noise.odom_att_sigma * z[6:9])
    return SensorReadings(
        odom_p=state.p + noise.odom_p_sigma * z[0:3],
        odom_v=state.v + noise.odom_v_sigma * z[3:6],
        odom_R=odom_R,
        imu_accel_body=imu + noise.imu_sigma * z[9:12],
        rotor_speeds_meas=state.rotor_speeds * (1.0 + noise.rotor_rel_sigma * z[12:16]),
    )


def with_mass(params, m):
    return replace(params, m=m, rotor_axes=params.rotor_axes.copy())
