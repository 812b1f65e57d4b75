"""PD pose controller producing acceleration and yaw-rate setpoints."""
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteInput
from .kernels import wrap_angle
from .vehicle import GRAVITY


@dataclass
class ControllerGains:
    Kp: np.ndarray = field(default_factory=lambda: np.array([14.0, 14.0, 20.0]))
    Kv: np.ndarray = field(default_factory=lambda: np.array([4.0, 4.0, 8.0]))
    K_psi: float = 3.0
    m: float = 2.3
    g: float = GRAVITY

    def __post_init__(self):
        for name in ("Kp", "Kv"):
            val = np.asarray(getattr(self, name), dtype=float)
            val = np.diag(val) if val.ndim == 2 else np.broadcast_to(val, (3,)).astype(float)
            if np.any(val <= 0):
                raise ValueError(f"{name} must be positive")
            setattr(self, name, val)
        if self.K_psi <= 0 or self.m <= 0:
            raise ValueError("K_psi and m must be positive")


def accel_command(ref, odom_p, odom_v, f_ext_hat, gains):
    """Acceleration setpoint including gravity and estimated-force compensation."""
    p = np.asarray(odom_p, dtype=float)
    v = np.asarray(odom_v, dtype=float)
    f = np.asarray(f_ext_hat, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v)) and np.all(np.isfinite(f))):
        raise NonFiniteInput("controller inputs are not finite")
    a = ref.a + gains.Kp * (ref.p - p) + gains.Kv * (ref.v - v) - f / gains.m
    a[2] += gains.g
    return a


def yaw_rate_command(yaw_d, yaw_rate_d, psi, gains):
    return yaw_rate_d + gains.K_psi * wrap_angle(yaw_d - psi)
