import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aerial_ndt.admittance import AdmittanceConfig
from aerial_ndt.contact import ProbeSpec, Quality, UTReading, breakaway_force
from aerial_ndt.errors import InvalidPose
from aerial_ndt.mission import (ALLOWED_EDGES, NOMINAL_SEQUENCE, InspectionRequest, MissionConfig, MissionInputs,
                                MissionState, Phase, approach_point, contact_detected, detach_waypoints, tick)

CFG = MissionConfig()
PROBE = ProbeSpec()
ADM = AdmittanceConfig()
REQ = InspectionRequest([1.5, 0.0, 1.0], [-1.0, 0.0, 0.0])
GOOD = UTReading(3.01, Quality.GOOD_STABLE, 2.0, True)


def inputs(t, **kw):
    base = dict(t=t, f_ext_hat=np.zeros(3), odom_p=np.zeros(3), odom_psi=0.0)
    base.update(kw)
    return MissionInputs(**base)


def step(state, t, **kw):
    return tick(state, inputs(t, **kw), CFG, PROBE, ADM)


def in_phase(phase):
    """Drive a fresh machine into ``phase`` along the nominal path."""
    s, d = step(MissionState(), 0.0, request=REQ)
    t = 0.0
    while s.phase != phase:
        t += 0.02
        kw = dict(odom_p=s.target_p, traj_done=True, ref_p=s.target_p, ref_yaw=s.target_yaw)
        if s.phase == Phase.MOVE_FORWARD:
            kw["f_ext_hat"] = np.array([-2.0, 0.0, 0.0])
        if s.phase == Phase.PERFORM_MEASUREMENT:
            kw["ut"] = GOOD
        s, _ = step(s, t, **kw)
    return s, t


class TestApproach:
    def test_approach_waypoint(self):
        assert np.allclose(approach_point(REQ, CFG), [1.0, 0.0, 1.0])
        s, d = step(MissionState(), 1.0, request=REQ)
        assert s.phase == Phase.APPROACH_INSPECTION
        np.testing.assert_allclose(d.waypoints[0].p, [0.7, 0.0, 1.0], atol=1e-12)
        assert d.waypoints[0].yaw == pytest.approx(0.0)

    def test_non_unit_normal(self):
        with pytest.raises(InvalidPose):
            InspectionRequest([1.5, 0, 1], [-2.0, 0, 0])

    def test_waits_until_on_target(self):
        s, _ = step(MissionState(), 0.0, request=REQ)
        s, d = step(s, 0.1, odom_p=np.zeros(3), traj_done=True)
        assert s.phase == Phase.APPROACH_INSPECTION and not d.any()
        s, d = step(s, 0.2, odom_p=s.target_p, traj_done=True)
        assert s.phase == Phase.PREPARE_CONTACT
        assert d.enable_admittance and d.begin_bias_window

    def test_bias_window_then_move(self):
        s, t = in_phase(Phase.PREPARE_CONTACT)
        s, d = step(s, t + 1.0)
        assert s.phase == Phase.PREPARE_CONTACT
        s, d = step(s, t + 2.0)
        assert s.phase == Phase.MOVE_FORWARD and d.estimate_bias
        depth = 2.0 / 30.0
        np.testing.assert_allclose(d.waypoints[0].p, [1.5 + depth - 0.3, 0.0, 1.0], atol=1e-12)
        assert d.max_vel == CFG.approach_speed


class TestContact:
    @pytest.mark.parametrize("f,thr,expected", [
        ((0.5, 0, 0), 1.0, False), ((-0.8, 0.8, 0), 1.0, True), ((0, 0, 0), 0.1, False)])
    def test_contact_detected(self, f, thr, expected):
        assert contact_detected(np.array(f, dtype=float), thr) is expected

    def test_latch(self):
        s, t = in_phase(Phase.MOVE_FORWARD)
        s, _ = step(s, t + 0.02, f_ext_hat=np.array([-1.2, 0.0, 0.0]), traj_done=False)
        assert s.contact_latched and s.phase == Phase.MOVE_FORWARD
        s, d = step(s, t + 0.04, traj_done=True)
        assert s.phase == Phase.PERFORM_MEASUREMENT
        assert d.dispense_couplant and d.request_measurement

    def test_contact_timeout(self):
        s, t = in_phase(Phase.MOVE_FORWARD)
        s, _ = step(s, t + 0.02, traj_done=True)
        s, _ = step(s, t + 0.02 + CFG.t_contact_timeout + 0.1, traj_done=True)
        assert s.phase == Phase.ABORTED and s.reason == "contact timeout"


class TestMeasurement:
    def test_good_stable_leads_to_detach(self):
        s, t = in_phase(Phase.PERFORM_MEASUREMENT)
        s, _ = step(s, t + 0.1, ut=GOOD)
        assert s.phase == Phase.PERFORM_MEASUREMENT
        s, d = step(s, t + 0.1 + CFG.t_record, ut=GOOD, ref_p=np.array([1.267, 0, 1]), ref_yaw=0.0)
        assert s.phase == Phase.DETACH
        assert d.stop_measurement and d.max_vel == CFG.detach_speed
        assert s.measurement.thickness == 3.01

    def test_interrupted_quality_restarts_dwell(self):
        s, t = in_phase(Phase.PERFORM_MEASUREMENT)
        s, _ = step(s, t + 0.1, ut=GOOD)
        s, _ = step(s, t + 0.6, ut=UTReading(3.0, Quality.UNSTABLE))
        s, _ = step(s, t + 0.7, ut=GOOD)
        s, _ = step(s, t + 1.2, ut=GOOD)
        assert s.phase == Phase.PERFORM_MEASUREMENT

    def test_measurement_timeout(self):
        s, t = in_phase(Phase.PERFORM_MEASUREMENT)
        s, d = step(s, t + CFG.t_measurement_max + 0.1)
        assert s.phase == Phase.ABORTED and d.stop_measurement


class TestDetach:
    def test_waypoints(self):
        p = np.array([1.2, 0.0, 1.0])
        pivot, target = detach_waypoints(p, 0.0, REQ.normal, CFG, PROBE)
        np.testing.assert_allclose(target.p - p, [-0.5, 0.3, 0.0], atol=1e-12)
        assert target.yaw == pytest.approx(math.radians(60.0))
        tip = p + PROBE.offset_body
        rot = math.radians(60.0)
        np.testing.assert_allclose(pivot.p + 0.3 * np.array([math.cos(rot), math.sin(rot), 0.0]), tip, atol=1e-12)

    def test_release_yaw_zeroes_breakaway(self):
        assert breakaway_force(PROBE, CFG.detach_yaw) == 0.0

    def test_zero_offsets_pure_yaw(self):
        cfg = MissionConfig(detach_back_offset=0.0, detach_lateral_offset=0.0)
        p = np.array([1.2, 0.0, 1.0])
        pivot, target = detach_waypoints(p, 0.0, REQ.normal, cfg, PROBE)
        np.testing.assert_allclose(target.p, p)
        assert target.yaw == pivot.yaw == pytest.approx(cfg.detach_yaw)

    def test_done_when_clear(self):
        s, t = in_phase(Phase.DETACH)
        s, _ = step(s, t + 0.1, odom_p=np.array([1.1, 0.0, 1.0]))
        assert s.phase == Phase.DETACH
        s, _ = step(s, t + 0.2, odom_p=np.array([0.7, 0.3, 1.0]), odom_psi=math.radians(60))
        assert s.phase == Phase.DONE


def test_nominal_timeline():
    s, t = in_phase(Phase.DETACH)
    s, _ = step(s, t + 0.1, odom_p=np.array([0.5, 0.3, 1.0]))
    assert tuple(ph for ph, _ in s.timeline) == NOMINAL_SEQUENCE


def test_abort_from_every_active_phase():
    for phase in NOMINAL_SEQUENCE[:-1]:
        s, t = (MissionState(), 0.0) if phase == Phase.IDLE else in_phase(phase)
        s, d = step(s, t + 0.01, abort="operator")
        assert s.phase == Phase.ABORTED and s.reason == "operator"
        s2, d2 = step(s, t + 0.1, request=REQ, ut=GOOD, traj_done=True)
        assert s2 is s and not d2.any()


observations = st.fixed_dictionaries({
    "dt": st.sampled_from([0.02, 0.5, 3.0]),
    "f": st.sampled_from([0.0, 0.5, 2.0]),
    "traj_done": st.booleans(),
    "on_target": st.booleans(),
    "ut": st.sampled_from([None, Quality.NO_SIGNAL, Quality.UNSTABLE, Quality.GOOD_STABLE]),
    "away": st.booleans(),
    "request": st.booleans(),
    "abort": st.sampled_from([None, None, None, None, "operator"]),
})


@settings(max_examples=200, deadline=None)
@given(st.lists(observations, min_size=1, max_size=80))
def test_transition_graph_closure(obs):
    s, t = MissionState(), 0.0
    dispensed = 0
    for o in obs:
        t += o["dt"]
        if s.phase == Phase.DETACH and o["away"]:
            odom = np.array([0.4, 0.3, 1.0])
        else:
            odom = s.target_p if (o["on_target"] and s.target_p is not None) else np.zeros(3)
        ut = None if o["ut"] is None else UTReading(3.0, o["ut"])
        prev = s.phase
        s, d = step(s, t, f_ext_hat=np.array([-o["f"], 0, 0]), traj_done=o["traj_done"], odom_p=odom,
                    ut=ut, request=REQ if o["request"] else None, abort=o["abort"],
                    ref_p=odom, ref_yaw=0.0)
        if s.phase != prev:
            assert (prev, s.phase) in ALLOWED_EDGES
            if s.phase == Phase.PERFORM_MEASUREMENT:
                dispensed = 0
        if prev.terminal:
            assert not d.any()
        dispensed += d.dispense_couplant
        assert dispensed <= 1
    phases = [ph for ph, _ in s.timeline]
    assert all(b in (a + 1, Phase.ABORTED) for a, b in zip(phases, phases[1:]))
