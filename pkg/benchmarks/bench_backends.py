"""Compare the numba and pure-numpy kernel backends.

The backend is fixed at import time, so each measurement runs in a fresh
interpreter with ``AERIAL_NDT_JIT`` set. Reports the wall time of the
physics kernel alone and of a full nominal mission, and checks that both
backends produce the same trajectory.

    python benchmarks/bench_backends.py [--ticks 20000] [--mission-duration 60]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from aerial_ndt import BACKEND, default_scenario, run
from aerial_ndt import kernels as K
from aerial_ndt.contact import ContactState
from aerial_ndt.vehicle import VehicleState

ticks, duration = int(sys.argv[1]), float(sys.argv[2])
sc = default_scenario()
vp, axes = sc.vehicle.as_array(), np.ascontiguousarray(sc.vehicle.rotor_axes)
pp = sc.probe.as_array(sc.surface)

def fresh():
    xs = VehicleState.hover(sc.vehicle, sc.run.initial_position, 0.0).to_array()
    return xs, ContactState().to_array()

cmd = np.array([0.3, 0.0, sc.vehicle.g + 0.1, 0.05])
t0 = time.perf_counter()
xs, cs = fresh()
K.physics_ticks(xs, cs, cmd, vp, axes, pp, np.zeros(3), 1e-3, 1)
warm = time.perf_counter() - t0

xs, cs = fresh()
t0 = time.perf_counter()
K.physics_ticks(xs, cs, cmd, vp, axes, pp, np.zeros(3), 1e-3, ticks)
kernel = time.perf_counter() - t0

sc_run = default_scenario(duration=duration)
t0 = time.perf_counter()
log = run(sc_run)
mission = time.perf_counter() - t0
print(json.dumps({
    "backend": BACKEND, "first_call_s": warm, "kernel_s": kernel, "mission_s": mission,
    "sim_time_s": float(log.t[-1]), "final_p": log.vec("p")[-1].tolist(), "outcome": log.meta["outcome"],
}))
"""


def measure(jit, ticks, duration):
    env = dict(os.environ, AERIAL_NDT_JIT="1" if jit else "0")
    out = subprocess.run([sys.executable, "-c", CHILD, str(ticks), str(duration)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--ticks", type=int, default=20000, help="physics ticks in the kernel-only timing")
    ap.add_argument("--mission-duration", type=float, default=60.0, help="scenario duration in s")
    args = ap.parse_args(argv)

    res = [measure(jit, args.ticks, args.mission_duration) for jit in (True, False)]
    print(f"{'backend':<8}{'first call':>12}{'kernel':>12}{'per tick':>12}{'mission':>10}{'sim time':>10}")
    for r in res:
        per_tick = r["kernel_s"] / args.ticks * 1e6
        print(f"{r['backend']:<8}{r['first_call_s']:>11.3f}s{r['kernel_s']:>11.3f}s"
              f"{per_tick:>10.2f}us{r['mission_s']:>9.2f}s{r['sim_time_s']:>9.1f}s")
    jit, py = res
    print(f"kernel speedup {py['kernel_s'] / jit['kernel_s']:.1f}x, mission speedup {py['mission_s'] / jit['mission_s']:.1f}x")
    dev = max(abs(a - b) for a, b in zip(jit["final_p"], py["final_p"]))
    print(f"final position difference between backends: {dev:.3e} m ({jit['outcome']} / {py['outcome']})")


if __name__ == "__main__":
    main()
