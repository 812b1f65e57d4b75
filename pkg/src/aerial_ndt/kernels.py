"""Hot inner-loop kernels of the physics tick.

Everything here runs at the physics rate (1 kHz), so the functions work on
flat float64 arrays with fixed index layouts instead of dataclasses. They are
compiled by numba unless the numpy fallback is selected (see ``_jit``).

Layouts
-------
vehicle state ``xs``   position, velocity, attitude quaternion (w, x, y, z),
                       rotor speeds, inner-loop yaw setpoint, held thrust
                       axis, last acceleration, time
vehicle params ``vp``  mass, thrust coefficient, lags, limits, gravity
probe params ``pp``    probe geometry/mechanics followed by the surface plane
contact state ``cs``   latch, anchor gap, attach yaw, couplant age, ...
"""
import math

import numpy as np

from ._jit import maybe_njit

# -- vehicle state layout
P = 0
V = 3
Q = 6
W = 10
YAW_SP = 14
B3 = 15
ACC = 18
TIME = 21
N_STATE = 22

# -- vehicle parameter layout
VP_M = 0
VP_CF = 1
VP_TAU_ATT = 2
VP_TAU_THRUST = 3
VP_OMEGA_MAX = 4
VP_G = 5
VP_F_MIN = 6
VP_ACC_MAX = 7
N_VP = 8

# -- probe + surface layout
PP_OFFSET = 0
PP_AXIS = 3
PP_K = 6
PP_D = 7
PP_ZC = 8
PP_FADH = 9
PP_FB0 = 10
PP_YAW_RELEASE = 11
PP_CAPTURE = 12
PP_POINT = 13
PP_NORMAL = 16
PP_FERRO = 19
PP_DRAMP = 20
N_PP = 21

# -- contact state layout
CS_ATTACHED = 0
CS_ANCHOR = 1
CS_YAW_ATTACH = 2
CS_COUPLANT = 3  # NaN when no couplant
CS_COMPRESSION = 4
CS_IFORCE = 5
CS_GAP = 6
CS_FORCE = 7
CS_DETACHED = 10  # sticky detach-event flag, cleared by the caller
CS_SLIP = 11
CS_ARMED = 12
CS_GAP_RATE = 13
N_CS = 14


@maybe_njit
def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    two_pi = 2.0 * math.pi
    r = a - two_pi * math.floor((a + math.pi) / two_pi)
    if r <= -math.pi:
        r += two_pi
    return r


@maybe_njit
def quat_to_rot(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (x * z + w * y)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


@maybe_njit
def quat_yaw(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


@maybe_njit
def quat_from_euler(yaw, pitch, roll):
    """ZYX (yaw-pitch-roll) Euler angles to a unit quaternion."""
    cy, sy = math.cos(0.5 * yaw), math.sin(0.5 * yaw)
    cp, sp = math.cos(0.5 * pitch), math.sin(0.5 * pitch)
    cr, sr = math.cos(0.5 * roll), math.sin(0.5 * roll)
    q = np.empty(4)
    q[0] = cr * cp * cy + sr * sp * sy
    q[1] = sr * cp * cy - cr * sp * sy
    q[2] = cr * sp * cy + sr * cp * sy
    q[3] = cr * cp * sy - sr * sp * cy
    return q


@maybe_njit
def quat_from_axis_yaw(b3, yaw):
    """Attitude whose body z-axis is ``b3`` and whose ZYX yaw is ``yaw``."""
    c, s = math.cos(yaw), math.sin(yaw)
    vx = c * b3[0] + s * b3[1]
    vy = -s * b3[0] + c * b3[1]
    vz = b3[2]
    roll = -math.asin(min(1.0, max(-1.0, vy)))
    pitch = math.atan2(vx, vz)
    return quat_from_euler(yaw, pitch, roll)


@maybe_njit
def slerp(q0, q1, alpha):
    dot = q0[0] * q1[0] + q0[1] * q1[1] + q0[2] * q1[2] + q0[3] * q1[3]
    target = q1.copy()
    if dot < 0.0:
        target = -target
        dot = -dot
    if dot > 0.9999995:
        out = q0 + alpha * (target - q0)
    else:
        theta = math.acos(dot)
        s = math.sin(theta)
        out = (math.sin((1.0 - alpha) * theta) / s) * q0 + (math.sin(alpha * theta) / s) * target
    return out / math.sqrt(out[0] ** 2 + out[1] ** 2 + out[2] ** 2 + out[3] ** 2)


@maybe_njit
def rotor_force(w, cf, axes):
    f = np.zeros(3)
    for i in range(w.shape[0]):
        f += cf * abs(w[i]) * w[i] * axes[i]
    return f


@maybe_njit
def inner_loop_update(xs, cmd, vp, dt):
    """Advance the emulated low-level controller by one physics step.

    Attitude relaxes toward the commanded thrust axis and integrated yaw
    setpoint with time constant ``tau_att``; collective thrust relaxes toward
    ``m * |accel_cmd|`` with ``tau_thrust``. Thrust is split equally.
    """
    m = vp[VP_M]
    cf = vp[VP_CF]
    acc = cmd[0:3].copy()
    an = math.sqrt(acc[0] ** 2 + acc[1] ** 2 + acc[2] ** 2)
    if an > vp[VP_ACC_MAX]:
        acc *= vp[VP_ACC_MAX] / an
        an = vp[VP_ACC_MAX]
    xs[YAW_SP] = wrap_angle(xs[YAW_SP] + cmd[3] * dt)
    fn = m * an
    if fn >= vp[VP_F_MIN]:
        xs[B3:B3 + 3] = acc / an
    q_des = quat_from_axis_yaw(xs[B3:B3 + 3], xs[YAW_SP])
    alpha = 1.0 - math.exp(-dt / vp[VP_TAU_ATT])
    xs[Q:Q + 4] = slerp(xs[Q:Q + 4], q_des, alpha)

    w = xs[W:W + 4]
    thrust = cf * (w[0] ** 2 + w[1] ** 2 + w[2] ** 2 + w[3] ** 2)
    beta = 1.0 - math.exp(-dt / vp[VP_TAU_THRUST])
    thrust += beta * (fn - thrust)
    wi = min(math.sqrt(max(thrust, 0.0) / (4.0 * cf)), vp[VP_OMEGA_MAX])
    for i in range(4):
        xs[W + i] = wi


@maybe_njit
def dynamics_update(xs, f_ext, vp, axes, dt):
    """Semi-implicit Euler step of the translational dynamics."""
    m = vp[VP_M]
    R = quat_to_rot(xs[Q:Q + 4])
    f = R @ rotor_force(xs[W:W + 4], vp[VP_CF], axes) + f_ext
    f[2] -= m * vp[VP_G]
    acc = f / m
    xs[ACC:ACC + 3] = acc
    xs[V:V + 3] += acc * dt
    xs[P:P + 3] += xs[V:V + 3] * dt
    xs[TIME] += dt


@maybe_njit
def breakaway(fb0, yaw_release, psi_rel):
    return fb0 * max(0.0, 1.0 - psi_rel / yaw_release)


@maybe_njit
def ramp(comp, width):
    """Damper engagement: 0 at first touch, 1 beyond ``width`` of compression."""
    if width <= 0.0:
        return 1.0
    return min(comp / width, 1.0)


@maybe_njit
def contact_update(cs, tip, tip_vel, psi, pp, dt):
    """Probe/surface interaction for one physics step.

    Writes the force on the vehicle into ``cs[CS_FORCE:CS_FORCE+3]``.
    """
    n = pp[PP_NORMAL:PP_NORMAL + 3]
    k = pp[PP_K]
    ds = pp[PP_D]
    gap = n[0] * (tip[0] - pp[PP_POINT]) + n[1] * (tip[1] - pp[PP_POINT + 1]) + n[2] * (tip[2] - pp[PP_POINT + 2])
    gap_rate = n[0] * tip_vel[0] + n[1] * tip_vel[1] + n[2] * tip_vel[2]
    lat = tip_vel - gap_rate * n
    cs[CS_SLIP] = math.sqrt(lat[0] ** 2 + lat[1] ** 2 + lat[2] ** 2)
    cs[CS_GAP] = gap
    cs[CS_GAP_RATE] = gap_rate

    fn = 0.0
    fup = 0.0
    comp = 0.0
    ferro = pp[PP_FERRO] > 0.5
    if cs[CS_ATTACHED] < 0.5:
        if gap > pp[PP_CAPTURE]:
            cs[CS_ARMED] = 1.0
        if gap <= 0.0:
            comp = -gap
            fn = k * comp + ds * ramp(comp, pp[PP_DRAMP]) * max(-gap_rate, 0.0)
        if ferro and cs[CS_ARMED] > 0.5 and gap <= pp[PP_CAPTURE]:
            cs[CS_ATTACHED] = 1.0
            cs[CS_ANCHOR] = max(gap, 0.0)
            cs[CS_YAW_ATTACH] = psi
        iforce = max(k * comp, 0.0)
        if cs[CS_ATTACHED] > 0.5:
            iforce += pp[PP_FADH]
    else:
        # the hood stays clamped where the magnet caught it
        anchor = min(cs[CS_ANCHOR], max(gap, 0.0))
        cs[CS_ANCHOR] = anchor
        comp = anchor - gap
        if comp > 0.0:
            fn = max(k * comp + ds * ramp(comp, pp[PP_DRAMP]) * (-gap_rate), 0.0)
        else:
            fn = k * comp
        fup = pp[PP_ZC] * max(comp, 0.0)
        psi_rel = abs(wrap_angle(psi - cs[CS_YAW_ATTACH]))
        limit = breakaway(pp[PP_FB0], pp[PP_YAW_RELEASE], psi_rel)
        if comp < 0.0 and -fn > limit:
            cs[CS_ATTACHED] = 0.0
            cs[CS_ARMED] = 0.0
            cs[CS_COUPLANT] = np.nan
            cs[CS_DETACHED] = 1.0
            fn = 0.0
            fup = 0.0
            comp = 0.0
            iforce = 0.0
        else:
            if not math.isnan(cs[CS_COUPLANT]):
                cs[CS_COUPLANT] += dt
            iforce = max(k * comp, 0.0) + pp[PP_FADH]

    cs[CS_COMPRESSION] = comp
    cs[CS_IFORCE] = iforce
    cs[CS_FORCE] = fn * n[0]
    cs[CS_FORCE + 1] = fn * n[1]
    cs[CS_FORCE + 2] = fn * n[2] + fup


@maybe_njit
def probe_kinematics(xs, pp):
    R = quat_to_rot(xs[Q:Q + 4])
    tip = xs[P:P + 3] + R @ pp[PP_OFFSET:PP_OFFSET + 3]
    axis = R @ pp[PP_AXIS:PP_AXIS + 3]
    return tip, axis, xs[V:V + 3].copy()


@maybe_njit
def physics_ticks(xs, cs, cmd, vp, axes, pp, f_dist, dt, n_ticks):
    """Run ``n_ticks`` physics steps with a held command.

    Per step: contact, inner loop, translational dynamics. ``f_dist`` is an
    extra constant world-frame force. Returns False as soon as the state
    turns non-finite.
    """
    for _ in range(n_ticks):
        tip, _axis, tip_vel = probe_kinematics(xs, pp)
        contact_update(cs, tip, tip_vel, quat_yaw(xs[Q:Q + 4]), pp, dt)
        inner_loop_update(xs, cmd, vp, dt)
        dynamics_update(xs, cs[CS_FORCE:CS_FORCE + 3] + f_dist, vp, axes, dt)
        for i in range(N_STATE):
            if not math.isfinite(xs[i]):
                return False
    return True
