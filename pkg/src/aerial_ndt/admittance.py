"""Second-order admittance filter turning force estimates into compliant references."""
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import NonFiniteInput, ZeroStiffness


def _diag3(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = np.diag(x)
    return np.broadcast_to(x, (3,)).astype(float)


@dataclass
class AdmittanceConfig:
    M: np.ndarray = field(default_factory=lambda: np.full(3, 0.5))
    D: np.ndarray = field(default_factory=lambda: np.full(3, 7.5))
    K: np.ndarray = field(default_factory=lambda: np.array([30.0, 30.0, 100.0]))
    rate: float = 50.0

    def __post_init__(self):
        self.M, self.D, self.K = _diag3(self.M), _diag3(self.D), _diag3(self.K)
        if np.any(self.M <= 0) or np.any(self.D <= 0) or np.any(self.K <= 0):
            raise ValueError("virtual mass, damping and stiffness must be positive")


@dataclass
class AdmittanceState:
    e: np.ndarray = field(default_factory=lambda: np.zeros(3))
    e_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))


@lru_cache(maxsize=64)
def _zoh(m, d, k, dt):
    """Zero-order-hold transition (Phi, Gamma) of m*x'' + d*x' + k*x = u."""
    aug = np.zeros((3, 3))
    aug[0, 1] = 1.0
    aug[1, 0] = -k / m
    aug[1, 1] = -d / m
    aug[1, 2] = 1.0 / m
    ex = expm(aug * dt)
    return ex[:2, :2].copy(), ex[:2, 2].copy()


def discretize(cfg, dt):
    return [_zoh(float(cfg.M[i]), float(cfg.D[i]), float(cfg.K[i]), float(dt)) for i in range(3)]


def admittance_step(state, f_ext_hat, desired, cfg, dt=None):
    """Advance the virtual dynamics and shape the desired setpoint.

    ``f_ext_hat`` is the force acting on the vehicle. The error
    ``e = p_d - p_r`` is driven by ``-f_ext_hat`` so that the reference
    yields to a reaction force: a wall pushing along -x moves the reference
    back along -x by ``f/K`` at steady state.
    """
    dt = 1.0 / cfg.rate if dt is None else dt
    f = np.asarray(f_ext_hat, dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteInput("force estimate is not finite")
    u = -f
    e = np.empty(3)
    ed = np.empty(3)
    for i, (Phi, Gam) in enumerate(discretize(cfg, dt)):
        x = Phi @ np.array([state.e[i], state.e_dot[i]]) + Gam * u[i]
        e[i], ed[i] = x
    edd = (u - cfg.D * ed - cfg.K * e) / cfg.M
    compliant = replace(
        desired,
        p=desired.p - e,
        v=desired.v - ed,
        a=desired.a - edd,
    )
    return AdmittanceState(e, ed), compliant


def depth_for_force(f_des, cfg, axis):
    """Setpoint depth past the surface that yields ``f_des`` at steady state."""
    axis = np.asarray(axis, dtype=float)
    k = float(axis @ (cfg.K * axis))
    if k <= 0.0:
        raise ZeroStiffness("no virtual stiffness along the push axis")
    return f_des / k


def reset(state=None):
    return AdmittanceState()
