"""Deterministic multi-rate executive.

One loop at the physics rate. Tick order at every boundary ``k``:

1. sense (odometry, IMU, rotor speeds) at observer and control ticks
2. observer update                         every ``divisor('observer')`` ticks
3. UT sample, trajectory sample, mission tick, admittance step
                                           every ``divisor('ut')`` / ``divisor('planner')`` ticks
4. PD controller                           every ``divisor('control')`` ticks
5. log row                                 every ``divisor('log')`` ticks
6. physics (contact, inner loop, dynamics) for the ticks up to the next boundary

All cross-rate signals are zero-order held. Physics runs batched in the
compiled kernel between boundaries; the batch length is the gcd of all
task divisors, so no task boundary is ever skipped.
"""
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels as K
from .admittance import AdmittanceState, admittance_step
from .contact import ContactState, ut_sample
from .controller import accel_command, yaw_rate_command
from .errors import CouplantWithoutContact, NonFiniteState
from .mission import MissionInputs, MissionState, Phase, tick as mission_tick
from .observer import ForceEstimate, estimate_bias, observer_update
from .runlog import COLUMNS, INDEX, LogBuffer, RunLog
from .trajectory import ReferenceSetpoint, Waypoint, plan, sample
from .vehicle import VehicleState, sense

_I = INDEX


@dataclass
class TaskCounters:
    """Tick indices at which each periodic task ran."""
    observer: list = field(default_factory=list)
    planner: list = field(default_factory=list)
    control: list = field(default_factory=list)
    ut: list = field(default_factory=list)


def _fill_row(row, t, phase, xs, cs, f_dist, compliant, desired, est, ut, ut_seq, latched):
    row[_I["t"]] = t
    row[_I["phase"]] = int(phase)
    row[_I["p_x"]:_I["p_x"] + 3] = xs[K.P:K.P + 3]
    row[_I["v_x"]:_I["v_x"] + 3] = xs[K.V:K.V + 3]
    row[_I["psi"]] = K.quat_yaw(xs[K.Q:K.Q + 4])
    row[_I["pr_x"]:_I["pr_x"] + 3] = compliant.p
    row[_I["vr_x"]:_I["vr_x"] + 3] = compliant.v
    row[_I["yaw_r"]] = compliant.yaw
    row[_I["ref_t"]] = compliant.t
    row[_I["pd_x"]:_I["pd_x"] + 3] = desired.p
    row[_I["yaw_d"]] = desired.yaw
    row[_I["fext_x"]:_I["fext_x"] + 3] = cs[K.CS_FORCE:K.CS_FORCE + 3] + f_dist
    row[_I["fhat_x"]:_I["fhat_x"] + 3] = est.f_hat
    row[_I["ffilt_x"]:_I["ffilt_x"] + 3] = est.f_hat_filtered
    row[_I["fcorr_x"]:_I["fcorr_x"] + 3] = est.output
    row[_I["bias_x"]:_I["bias_x"] + 3] = est.bias
    row[_I["w1"]:_I["w1"] + 4] = xs[K.W:K.W + 4]
    row[_I["attached"]] = cs[K.CS_ATTACHED]
    row[_I["compression"]] = cs[K.CS_COMPRESSION]
    row[_I["interface_force"]] = cs[K.CS_IFORCE]
    row[_I["gap"]] = cs[K.CS_GAP]
    row[_I["slip"]] = cs[K.CS_SLIP]
    row[_I["couplant_age"]] = cs[K.CS_COUPLANT]
    row[_I["detach_event"]] = cs[K.CS_DETACHED]
    row[_I["ut_quality"]] = -1 if ut is None else int(ut.quality)
    row[_I["ut_thickness"]] = math.nan if ut is None else ut.thickness
    row[_I["ut_seq"]] = ut_seq
    row[_I["contact_latched"]] = float(latched)


def run(scenario, *, observer_hook=None, log=True, counters=None):
    """Simulate ``scenario`` and return its :class:`~aerial_ndt.runlog.RunLog`.

    ``observer_hook(t, readings)`` is called at every observer tick with the
    sensor readings it consumed. With ``log=False`` no rows are recorded
    (the meta data is still returned). ``counters`` (a :class:`TaskCounters`)
    collects the tick index of every periodic task.
    """
    sc = scenario
    sc.check_rates()
    params, gains = sc.vehicle, sc.gains
    phys_rate = sc.run.physics_rate
    dt = 1.0 / phys_rate
    div = {name: sc.divisor(name) for name in ("control", "observer", "planner", "ut", "log")}
    batch = math.gcd(*div.values())
    n_ticks = int(round(sc.run.duration * phys_rate))
    dt_obs = div["observer"] * dt
    dt_plan = div["planner"] * dt

    rng_sense = np.random.default_rng([sc.run.seed, 0])
    rng_ut = np.random.default_rng([sc.run.seed, 1])

    vp = params.as_array()
    axes = np.ascontiguousarray(params.rotor_axes)
    pp = sc.probe.as_array(sc.surface)
    f_dist = np.asarray(sc.run.f_disturbance, dtype=float).copy()
    p0 = sc.run.initial_position
    yaw0 = sc.run.initial_yaw
    xs = VehicleState.hover(params, p0, yaw0).to_array()
    cs = ContactState().to_array()
    cmd = np.array([0.0, 0.0, params.g, 0.0])

    est = ForceEstimate()
    bias_hist = None
    adm_state, adm_on = AdmittanceState(), False
    mission = MissionState()
    request = sc.request
    traj, traj_t0 = None, 0.0
    desired = ReferenceSetpoint.hold(p0, yaw0)
    compliant = desired
    ut_on, ut, ut_seq = False, None, 0
    limits = sc.trajectory
    readings = None
    t_terminal = None

    buf = LogBuffer(n_ticks // div["log"] + 2) if log else None

    k = 0
    while True:
        t = k * dt
        # 1. sensing, from the truth at the start of this tick; only where a
        # consumer runs, so the noise stream does not depend on the log rate
        if k % div["control"] == 0 or k % div["observer"] == 0:
            state = VehicleState.from_array(xs)
            readings = sense(state, cs[K.CS_FORCE:K.CS_FORCE + 3] + f_dist, params, sc.noise, rng_sense)

        # 2. force observer
        if k % div["observer"] == 0:
            est = observer_update(est, readings.imu_accel_body, readings.odom_R,
                                  readings.rotor_speeds_meas, params, sc.observer, dt_obs)
            if bias_hist is not None:
                bias_hist.append(est.f_hat_filtered)
            if counters is not None:
                counters.observer.append(k)
            if observer_hook is not None:
                observer_hook(t, readings)

        # 3a. ultrasonic readout
        if ut_on and k % div["ut"] == 0:
            ut = ut_sample(ContactState.from_array(cs), sc.surface, sc.ut, rng_ut, previous=ut)
            ut_seq += 1
            if counters is not None:
                counters.ut.append(k)

        # 3b. planner: trajectory -> mission -> admittance
        if k % div["planner"] == 0:
            if traj is not None:
                desired = replace(sample(traj, t - traj_t0), t=t)
                traj_done = t - traj_t0 >= traj.total_duration
            else:
                desired = replace(desired, t=t)
                traj_done = True
            inputs = MissionInputs(
                t=t, f_ext_hat=est.output, odom_p=readings.odom_p, odom_psi=readings.odom_psi,
                ut=ut, traj_done=traj_done, ref_p=desired.p, ref_yaw=desired.yaw,
                request=request if (mission.phase == Phase.IDLE and request is not None
                                    and t >= sc.request_cfg.t_start - 1e-12) else None,
            )
            mission, d = mission_tick(mission, inputs, sc.mission, sc.probe, sc.admittance)
            if d.begin_bias_window:
                bias_hist = []
            if d.estimate_bias:
                est = replace(est, bias=estimate_bias(bias_hist, sc.mission.t_bias_window, sc.observer.rate))
                bias_hist = None
            if d.enable_admittance:
                adm_state, adm_on = AdmittanceState(), True
            if d.waypoints:
                lim = limits if d.max_vel is None else replace(limits, max_vel=min(d.max_vel, limits.max_vel))
                traj = plan([Waypoint(desired.p, desired.yaw)] + list(d.waypoints), lim)
                traj_t0 = t
                desired = replace(sample(traj, 0.0), t=t)
            if d.dispense_couplant:
                if cs[K.CS_ATTACHED] > 0.5:
                    cs[K.CS_COUPLANT] = 0.0
                else:
                    warnings.warn("couplant dispensed without probe contact", CouplantWithoutContact,
                                  stacklevel=2)
            if d.request_measurement:
                ut_on, ut = True, None
            if d.stop_measurement:
                ut_on = False
            if adm_on:
                adm_state, compliant = admittance_step(adm_state, est.output, desired, sc.admittance, dt_plan)
            else:
                compliant = desired
            if counters is not None:
                counters.planner.append(k)
            if mission.phase.terminal and t_terminal is None:
                t_terminal = t

        # 4. PD controller
        if k % div["control"] == 0:
            cmd[:3] = accel_command(compliant, readings.odom_p, readings.odom_v, est.output, gains)
            cmd[3] = yaw_rate_command(compliant.yaw, compliant.yaw_rate, readings.odom_psi, gains)
            if counters is not None:
                counters.control.append(k)

        # 5. log
        if buf is not None and k % div["log"] == 0:
            _fill_row(buf.next_row(), t, mission.phase, xs, cs, f_dist, compliant, desired, est,
                      ut if ut_on else None, ut_seq, mission.contact_latched)
            cs[K.CS_DETACHED] = 0.0

        done = k >= n_ticks
        if t_terminal is not None and sc.run.stop_after_terminal >= 0:
            done = done or t - t_terminal >= sc.run.stop_after_terminal - 1e-12
        if done:
            break

        # 6. physics up to the next boundary
        n = min(batch, n_ticks - k)
        if not K.physics_ticks(xs, cs, cmd, vp, axes, pp, f_dist, dt, n):
            raise NonFiniteState("simulation diverged", tick=k + n)
        k += n

    if mission.phase == Phase.DONE:
        outcome = "success"
    elif mission.phase == Phase.ABORTED:
        outcome = "aborted"
    else:
        outcome = "incomplete"
    meta = {
        "seed": int(sc.run.seed),
        "outcome": outcome,
        "reason": mission.reason,
        "timeline": [[int(ph), round(tt, 9)] for ph, tt in mission.timeline],
        "bias": [float(b) for b in est.bias],
        "log_rate": sc.run.log_rate,
        "ut_rate": sc.ut.rate,
        "physics_rate": phys_rate,
        "measurement": None if mission.measurement is None else float(mission.measurement.thickness),
    }
    if buf is None:
        return RunLog(np.empty((0, len(COLUMNS))), meta)
    return buf.finish(meta)
