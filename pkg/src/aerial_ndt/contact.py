"""Inspection surface, compliant magnetic probe and ultrasonic readout model."""
import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .errors import CouplantWithoutContact


@dataclass
class SurfaceSpec:
    point: np.ndarray = field(default_factory=lambda: np.array([1.5, 0.0, 1.0]))
    normal: np.ndarray = field(default_factory=lambda: np.array([-1.0, 0.0, 0.0]))
    true_thickness: float = 3.0
    ferromagnetic: bool = True

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        self.normal = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-9:
            raise ValueError("surface normal must be a unit vector")
        if self.true_thickness <= 0:
            raise ValueError("true_thickness must be positive")

    def distance(self, x):
        return float(self.normal @ (np.asarray(x, dtype=float) - self.point))


@dataclass
class ProbeSpec:
    offset_body: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.0, 0.0]))
    axis_body: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    k_spring: float = 2000.0
    d_spring: float = 80.0
    z_coupling: float = 300.0
    f_adhesion: float = 0.0
    f_breakaway_0: float = 8.0
    yaw_release: float = math.radians(60.0)
    capture_dist: float = 0.005
    damping_ramp: float = 0.001  # compression over which the damper engages

    def __post_init__(self):
        self.offset_body = np.asarray(self.offset_body, dtype=float)
        self.axis_body = np.asarray(self.axis_body, dtype=float)
        if self.k_spring <= 0 or self.capture_dist <= 0:
            raise ValueError("k_spring and capture_dist must be positive")
        if self.d_spring < 0 or self.damping_ramp < 0:
            raise ValueError("d_spring and damping_ramp must be non-negative")
        if not self.f_breakaway_0 >= self.f_adhesion >= 0:
            raise ValueError("need f_breakaway_0 >= f_adhesion >= 0")

    def as_array(self, surface):
        pp = np.empty(K.N_PP)
        pp[K.PP_OFFSET:K.PP_OFFSET + 3] = self.offset_body
        pp[K.PP_AXIS:K.PP_AXIS + 3] = self.axis_body
        pp[K.PP_K] = self.k_spring
        pp[K.PP_D] = self.d_spring
        pp[K.PP_ZC] = self.z_coupling
        pp[K.PP_FADH] = self.f_adhesion
        pp[K.PP_FB0] = self.f_breakaway_0
        pp[K.PP_YAW_RELEASE] = self.yaw_release
        pp[K.PP_CAPTURE] = self.capture_dist
        pp[K.PP_POINT:K.PP_POINT + 3] = surface.point
        pp[K.PP_NORMAL:K.PP_NORMAL + 3] = surface.normal
        pp[K.PP_FERRO] = 1.0 if surface.ferromagnetic else 0.0
        pp[K.PP_DRAMP] = self.damping_ramp
        return pp


@dataclass
class ContactState:
    attached: bool = False
    compression: float = 0.0
    yaw_at_attach: float = 0.0
    couplant_age: float | None = None
    interface_normal_force: float = 0.0
    anchor_gap: float = 0.0
    armed: bool = True
    gap: float = math.inf
    slip_speed: float = 0.0

    def to_array(self):
        cs = np.zeros(K.N_CS)
        cs[K.CS_ATTACHED] = float(self.attached)
        cs[K.CS_ANCHOR] = self.anchor_gap
        cs[K.CS_YAW_ATTACH] = self.yaw_at_attach
        cs[K.CS_COUPLANT] = np.nan if self.couplant_age is None else self.couplant_age
        cs[K.CS_COMPRESSION] = self.compression
        cs[K.CS_IFORCE] = self.interface_normal_force
        cs[K.CS_GAP] = self.gap
        cs[K.CS_ARMED] = float(self.armed)
        cs[K.CS_SLIP] = self.slip_speed
        return cs

    @classmethod
    def from_array(cls, cs):
        age = cs[K.CS_COUPLANT]
        return cls(
            attached=bool(cs[K.CS_ATTACHED] > 0.5),
            compression=float(cs[K.CS_COMPRESSION]),
            yaw_at_attach=float(cs[K.CS_YAW_ATTACH]),
            couplant_age=None if math.isnan(age) else float(age),
            interface_normal_force=float(cs[K.CS_IFORCE]),
            anchor_gap=float(cs[K.CS_ANCHOR]),
            armed=bool(cs[K.CS_ARMED] > 0.5),
            gap=float(cs[K.CS_GAP]),
            slip_speed=float(cs[K.CS_SLIP]),
        )


class Quality(enum.IntEnum):
    NO_SIGNAL = 0
    UNSTABLE = 1
    GOOD_STABLE = 2


@dataclass
class UTQualityConfig:
    rate: float = 10.0
    t_couplant_life: float = 60.0
    f_lo: float = 0.7
    f_hi: float = 6.0
    v_slip_max: float = 0.02
    t_stable: float = 2.0
    sigma_ut: float = 0.02


@dataclass
class UTReading:
    thickness: float
    quality: Quality
    stable_duration: float = 0.0
    good: bool = False  # coupling condition held at this sample


def probe_tip(state, probe):
    """Tip position, pointing axis and velocity of the cage-mounted probe.

    The angular-velocity contribution to the tip velocity is neglected.
    """
    R = state.R
    return state.p + R @ probe.offset_body, R @ probe.axis_body, state.v.copy()


def breakaway_force(probe, psi_rel):
    """Tension needed to pull the magnetic hood off, reduced linearly by yaw."""
    psi_rel = abs(K.wrap_angle(psi_rel))
    return K.breakaway(probe.f_breakaway_0, probe.yaw_release, psi_rel)


def contact_step(contact, tip, tip_vel, surface, probe, psi, dt=1e-3):
    """Advance the contact latch one physics step.

    Returns the new contact state and the force the probe exerts on the
    vehicle (world frame).
    """
    cs = contact.to_array()
    K.contact_update(cs, np.asarray(tip, dtype=float), np.asarray(tip_vel, dtype=float),
                     float(psi), probe.as_array(surface), dt)
    return ContactState.from_array(cs), cs[K.CS_FORCE:K.CS_FORCE + 3].copy()


def dispense_couplant(contact):
    if not contact.attached:
        warnings.warn("couplant dispensed without probe contact", CouplantWithoutContact, stacklevel=2)
        return contact
    return ContactState(**{**contact.__dict__, "couplant_age": 0.0})


def ut_sample(contact, surface, cfg, rng, slip_speed=None, previous=None):
    """One ultrasonic thickness sample at the measurement rate.

    ``previous`` carries the dwell history; the good coupling condition must
    hold for ``t_stable`` seconds of consecutive samples before the reading
    is reported as good and stable.
    """
    coupled = (
        contact.attached
        and contact.couplant_age is not None
        and 0.0 <= contact.couplant_age <= cfg.t_couplant_life
    )
    if not coupled:
        return UTReading(math.nan, Quality.NO_SIGNAL, 0.0, False)

    slip = contact.slip_speed if slip_speed is None else slip_speed
    force = contact.interface_normal_force
    good = cfg.f_lo <= force <= cfg.f_hi and slip <= cfg.v_slip_max
    if good and previous is not None and previous.good:
        dwell = previous.stable_duration + 1.0 / cfg.rate
    else:
        dwell = 0.0
    quality = Quality.GOOD_STABLE if good and dwell >= cfg.t_stable - 1e-9 else Quality.UNSTABLE
    thickness = surface.true_thickness + cfg.sigma_ut * rng.standard_normal()
    return UTReading(float(thickness), quality, dwell, good)
