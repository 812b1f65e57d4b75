"""Acceleration-based external force observer and thrust-coefficient identification."""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, InsufficientSamples, NonFiniteInput
from .vehicle import rotor_force_body


@dataclass
class ObserverConfig:
    L: np.ndarray = field(default_factory=lambda: np.full(3, 7.5))
    omega_c: float = 31.42
    rate: float = 100.0

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        if L.ndim == 2:
            L = np.diag(L)
        self.L = np.broadcast_to(L, (3,)).astype(float)
        if np.any(self.L <= 0) or self.omega_c <= 0:
            raise ValueError("observer gains must be positive")
        if np.any(self.L / self.rate >= 2.0):
            raise ValueError("L*dt must stay below 2")


@dataclass
class ForceEstimate:
    f_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))
    f_hat_filtered: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bias: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def output(self):
        """Filtered, bias-corrected estimate of the force acting on the vehicle."""
        return self.f_hat_filtered - self.bias


def force_residual(imu_accel_body, R_WB, rotor_speeds_meas, params):
    """``m*a + m*g*e3 - f_rot`` with the acceleration taken from the IMU.

    The IMU reports specific force, so ``m*(R*imu - g*e3) + m*g*e3`` collapses
    to ``m*R*imu``.
    """
    R = np.asarray(R_WB, dtype=float)
    f_rot = R @ rotor_force_body(rotor_speeds_meas, params)
    return params.m * (R @ np.asarray(imu_accel_body, dtype=float)) - f_rot


def observer_update(est, imu_accel_body, R_WB, rotor_speeds_meas, params, cfg, dt=None):
    dt = 1.0 / cfg.rate if dt is None else dt
    r = force_residual(imu_accel_body, R_WB, rotor_speeds_meas, params)
    if not np.all(np.isfinite(r)):
        raise NonFiniteInput("observer inputs are not finite")
    return observer_step(est, r, cfg, dt)


def observer_step(est, residual, cfg, dt):
    """Exact per-axis discretization of the first-order observer and low-pass."""
    a = np.exp(-cfg.L * dt)
    f_hat = a * est.f_hat + (1.0 - a) * residual
    b = np.exp(-cfg.omega_c * dt)
    filtered = b * est.f_hat_filtered + (1.0 - b) * f_hat
    return ForceEstimate(f_hat, filtered, est.bias.copy())


def estimate_bias(history, window=2.0, rate=100.0, min_samples=10):
    """Mean of the trailing ``window`` seconds of filtered observer output."""
    h = np.asarray(history, dtype=float).reshape(-1, 3)
    n = min(len(h), int(round(window * rate)))
    if n < min_samples:
        raise InsufficientSamples(f"bias window holds {n} samples, need {min_samples}")
    return h[-n:].mean(axis=0)


@dataclass
class IdentificationSample:
    mass: float
    rotor_speeds: np.ndarray  # mean, rad/s
    R: np.ndarray  # mean attitude


def identify_cf(dataset, rotor_axes=None, g=9.81):
    """Scalar least-squares thrust coefficient from hover data.

    Solves ``m_j g e3 = c_f R_j sum |w| w z_i`` over all samples and returns
    ``(c_f, residual_rms)``.
    """
    axes = np.tile([0.0, 0.0, 1.0], (4, 1)) if rotor_axes is None else np.asarray(rotor_axes, dtype=float)
    A, B = [], []
    for s in dataset:
        w = np.asarray(s.rotor_speeds, dtype=float)
        A.append(np.asarray(s.R, dtype=float) @ ((np.abs(w) * w) @ axes))
        B.append(np.array([0.0, 0.0, s.mass * g]))
    if not A:
        raise DegenerateData("empty dataset")
    A = np.concatenate(A)
    B = np.concatenate(B)
    denom = A @ A
    if denom == 0.0:
        raise DegenerateData("rotor data carries no thrust information")
    c_f = (A @ B) / denom
    res = B - c_f * A
    return float(c_f), float(np.sqrt(np.mean(res ** 2)))


def identification_experiment(scenario, masses=None, hover_duration=10.0, discard=2.0):
    """Simulated hover protocol: one hover per added mass, averaged readings.

    Each hover starts at the hover equilibrium of its mass. The first
    ``discard`` seconds are dropped and measured rotor speeds and attitude
    are averaged over the remaining observer samples.
    """
    from .scheduler import run  # scheduler depends on this module

    m0 = scenario.vehicle.m
    if masses is None:
        masses = [m0 + 0.1 * j for j in range(5)]
    dataset = []
    for mass in masses:
        sc = scenario.hover_variant(mass, hover_duration)
        ws, Rs = [], []

        def hook(t, readings):
            if t >= discard - 1e-12:
                ws.append(readings.rotor_speeds_meas)
                Rs.append(readings.odom_R)

        run(sc, observer_hook=hook, log=False)
        dataset.append(IdentificationSample(float(mass), np.mean(ws, axis=0), np.mean(Rs, axis=0)))
    return dataset


DATASET_HEADER = ["mass_kg", "w1", "w2", "w3", "w4"] + [f"R{i}{j}" for i in range(3) for j in range(3)]


def write_dataset(path, dataset):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(DATASET_HEADER)
        for s in dataset:
            wr.writerow([f"{v:.17g}" for v in [s.mass, *s.rotor_speeds, *np.ravel(s.R)]])


def read_dataset(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != DATASET_HEADER:
        raise DegenerateData(f"{path}: unexpected header")
    out = []
    for row in rows[1:]:
        vals = np.array([float(v) for v in row])
        out.append(IdentificationSample(vals[0], vals[1:5], vals[5:14].reshape(3, 3)))
    return out
