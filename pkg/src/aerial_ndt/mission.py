"""Six-phase inspection state machine.

The machine is ticked by the planner loop. It never touches the simulator;
it only emits directives (new waypoints, admittance enable, bias window,
couplant, UT sampling) that the executive carries out.
"""
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .admittance import depth_for_force
from .contact import Quality
from .errors import InvalidPose
from .trajectory import Waypoint


class Phase(enum.IntEnum):
    IDLE = 0
    APPROACH_INSPECTION = 1
    PREPARE_CONTACT = 2
    MOVE_FORWARD = 3
    PERFORM_MEASUREMENT = 4
    DETACH = 5
    DONE = 6
    ABORTED = 7

    @property
    def terminal(self):
        return self in (Phase.DONE, Phase.ABORTED)


NOMINAL_SEQUENCE = (
    Phase.IDLE,
    Phase.APPROACH_INSPECTION,
    Phase.PREPARE_CONTACT,
    Phase.MOVE_FORWARD,
    Phase.PERFORM_MEASUREMENT,
    Phase.DETACH,
    Phase.DONE,
)

ALLOWED_EDGES = frozenset(
    list(zip(NOMINAL_SEQUENCE[:-1], NOMINAL_SEQUENCE[1:]))
    + [(ph, Phase.ABORTED) for ph in NOMINAL_SEQUENCE[:-1]]
)


@dataclass
class MissionConfig:
    approach_offset: float = 0.5
    f_desired: float = 2.0
    f_contact_threshold: float = 1.0
    approach_speed: float = 0.1
    t_bias_window: float = 2.0
    t_measurement_max: float = 15.0
    detach_yaw: float = math.radians(60.0)
    detach_back_offset: float = 0.5
    detach_lateral_offset: float = 0.3
    detach_speed: float = 0.25
    pose_tolerance: float = 0.05
    t_record: float = 1.0
    t_contact_timeout: float = 10.0
    t_approach_timeout: float = 60.0
    t_detach_timeout: float = 20.0

    def __post_init__(self):
        if min(self.f_contact_threshold, self.f_desired, self.approach_speed, self.detach_speed) <= 0:
            raise ValueError("mission thresholds must be positive")


@dataclass
class InspectionRequest:
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        self.normal = np.asarray(self.normal, dtype=float)
        if self.point.shape != (3,) or self.normal.shape != (3,):
            raise InvalidPose("inspection pose needs a 3-vector point and normal")
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-6:
            raise InvalidPose("inspection normal must be a unit vector")


@dataclass
class MissionState:
    phase: Phase = Phase.IDLE
    phase_entry_time: float = 0.0
    contact_latched: bool = False
    measurement: object = None
    inspection_pose: InspectionRequest | None = None
    target_p: np.ndarray | None = None
    target_yaw: float = 0.0
    traj_done_since: float | None = None
    good_since: float | None = None
    reason: str | None = None
    timeline: tuple = ((Phase.IDLE, 0.0),)


@dataclass
class MissionInputs:
    t: float
    f_ext_hat: np.ndarray
    odom_p: np.ndarray
    odom_psi: float
    ut: object = None
    traj_done: bool = True
    ref_p: np.ndarray | None = None
    ref_yaw: float = 0.0
    request: InspectionRequest | None = None
    abort: str | None = None


@dataclass
class Directives:
    waypoints: list | None = None
    max_vel: float | None = None
    enable_admittance: bool = False
    begin_bias_window: bool = False
    estimate_bias: bool = False
    dispense_couplant: bool = False
    request_measurement: bool = False
    stop_measurement: bool = False

    def any(self):
        return any(v not in (None, False) for v in self.__dict__.values())


def contact_detected(f_ext_hat, threshold):
    return bool(np.linalg.norm(f_ext_hat) > threshold)


def _rz(yaw, v):
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]])


def facing_yaw(normal, probe):
    """Yaw that points the probe axis against the surface normal."""
    return math.atan2(-normal[1], -normal[0]) - math.atan2(probe.axis_body[1], probe.axis_body[0])


def body_target(tip_target, yaw, probe):
    return np.asarray(tip_target, dtype=float) - _rz(yaw, probe.offset_body)


def approach_point(request, cfg):
    """Pre-contact probe-tip position, ``approach_offset`` off the surface."""
    return request.point + request.normal * cfg.approach_offset


def tip_distance(odom_p, odom_psi, request, probe):
    tip = np.asarray(odom_p, dtype=float) + _rz(odom_psi, probe.offset_body)
    return float(request.normal @ (tip - request.point))


def lateral_direction(normal):
    lat = np.cross(normal, [0.0, 0.0, 1.0])
    n = np.linalg.norm(lat)
    if n < 1e-9:  # horizontal surface, any horizontal direction works
        return np.array([0.0, 1.0, 0.0])
    return lat / n


def detach_waypoints(p, yaw, normal, cfg, probe):
    """Release yaw pivoting about the clamped tip, then the backward + lateral retreat.

    The first waypoint turns the vehicle by ``detach_yaw`` around the probe
    tip so the magnet is peeled off by torque rather than by pulling. The
    retreat target is offset by ``detach_lateral_offset`` along
    ``normal x e3``, turned with the sign of ``detach_yaw``.
    """
    p = np.asarray(p, dtype=float)
    normal = np.asarray(normal, dtype=float)
    yaw_release = yaw + cfg.detach_yaw
    tip = p + _rz(yaw, probe.offset_body)
    pivot = tip - _rz(yaw_release, probe.offset_body)
    side = math.copysign(1.0, cfg.detach_yaw) * lateral_direction(normal)
    target = p + normal * cfg.detach_back_offset + side * cfg.detach_lateral_offset
    return [Waypoint(pivot, yaw_release), Waypoint(target, yaw_release)]


def _enter(state, phase, t, **changes):
    return replace(state, phase=phase, phase_entry_time=t, traj_done_since=None, good_since=None,
                   timeline=state.timeline + ((phase, t),), **changes)


def tick(state, inputs, cfg, probe, admittance_cfg):
    """Advance the mission one planner tick. Returns ``(state, directives)``."""
    d = Directives()
    ph = state.phase
    t = inputs.t
    if ph.terminal:
        return state, d
    if inputs.abort:
        d.stop_measurement = ph == Phase.PERFORM_MEASUREMENT
        return _enter(state, Phase.ABORTED, t, reason=inputs.abort, contact_latched=False), d

    elapsed = t - state.phase_entry_time
    if inputs.traj_done and state.traj_done_since is None:
        state = replace(state, traj_done_since=t)

    if ph == Phase.IDLE:
        if inputs.request is None:
            return state, d
        req = inputs.request
        yaw = facing_yaw(req.normal, probe)
        target = body_target(approach_point(req, cfg), yaw, probe)
        d.waypoints = [Waypoint(target, yaw)]
        return _enter(state, Phase.APPROACH_INSPECTION, t, inspection_pose=req,
                      target_p=target, target_yaw=yaw), d

    req = state.inspection_pose

    if ph == Phase.APPROACH_INSPECTION:
        if elapsed > cfg.t_approach_timeout:
            return _enter(state, Phase.ABORTED, t, reason="approach timeout"), d
        err = np.linalg.norm(np.asarray(inputs.odom_p) - state.target_p)
        if inputs.traj_done and err < cfg.pose_tolerance:
            d.enable_admittance = True
            d.begin_bias_window = True
            return _enter(state, Phase.PREPARE_CONTACT, t), d
        return state, d

    if ph == Phase.PREPARE_CONTACT:
        if elapsed >= cfg.t_bias_window - 1e-9:
            d.estimate_bias = True
            depth = depth_for_force(cfg.f_desired, admittance_cfg, -req.normal)
            target = body_target(req.point - req.normal * depth, state.target_yaw, probe)
            d.waypoints = [Waypoint(target, state.target_yaw)]
            d.max_vel = cfg.approach_speed
            return _enter(state, Phase.MOVE_FORWARD, t, target_p=target), d
        return state, d

    if ph == Phase.MOVE_FORWARD:
        latched = state.contact_latched or contact_detected(inputs.f_ext_hat, cfg.f_contact_threshold)
        state = replace(state, contact_latched=latched)
        if latched and inputs.traj_done:
            d.dispense_couplant = True
            d.request_measurement = True
            return _enter(state, Phase.PERFORM_MEASUREMENT, t), d
        if state.traj_done_since is not None and t - state.traj_done_since > cfg.t_contact_timeout:
            return _enter(state, Phase.ABORTED, t, reason="contact timeout", contact_latched=False), d
        return state, d

    if ph == Phase.PERFORM_MEASUREMENT:
        ut = inputs.ut
        good = ut is not None and ut.quality == Quality.GOOD_STABLE
        if not good:
            state = replace(state, good_since=None)
        elif state.good_since is None:
            state = replace(state, good_since=t)
        if good and t - state.good_since >= cfg.t_record - 1e-9:
            d.stop_measurement = True
            p0 = state.target_p if inputs.ref_p is None else inputs.ref_p
            d.waypoints = detach_waypoints(p0, inputs.ref_yaw, req.normal, cfg, probe)
            d.max_vel = cfg.detach_speed
            return _enter(state, Phase.DETACH, t, measurement=ut), d
        if elapsed > cfg.t_measurement_max:
            d.stop_measurement = True
            return _enter(state, Phase.ABORTED, t, reason="measurement timeout", contact_latched=False), d
        return state, d

    if ph == Phase.DETACH:
        if tip_distance(inputs.odom_p, inputs.odom_psi, req, probe) > 0.8 * cfg.approach_offset:
            return _enter(state, Phase.DONE, t, contact_latched=False), d
        if elapsed > cfg.t_detach_timeout:
            return _enter(state, Phase.ABORTED, t, reason="detach timeout", contact_latched=False), d
        return state, d

    raise AssertionError(f"unhandled phase {ph!r}")

