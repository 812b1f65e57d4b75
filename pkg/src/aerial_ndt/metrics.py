"""Run metrics computed from a log alone."""
import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoContactPhase, SchemaError
from .mission import Phase

RECOVERY_TOL = 0.02
INSPECTION_PHASES = (
    Phase.APPROACH_INSPECTION,
    Phase.PREPARE_CONTACT,
    Phase.MOVE_FORWARD,
    Phase.PERFORM_MEASUREMENT,
    Phase.DETACH,
)


@dataclass
class RunMetrics:
    rmse_x: float
    rmse_y: float
    rmse_z: float
    yz_err_y: float
    yz_err_z: float
    contact_force: float
    good_stable_duration: float
    detach_recovery: float
    thickness_mean: float
    thickness_std: float
    outcome: str
    seed: int = 0

    @property
    def rmse(self):
        return np.array([self.rmse_x, self.rmse_y, self.rmse_z])

    @property
    def yz_error(self):
        return np.array([self.yz_err_y, self.yz_err_z])

    def as_row(self):
        return asdict(self)

    def table(self):
        rows = [
            ("RMSE x / y / z [m]", f"{self.rmse_x:.4f} / {self.rmse_y:.4f} / {self.rmse_z:.4f}"),
            ("contact yz error [m]", f"{self.yz_err_y:.4f} / {self.yz_err_z:.4f}"),
            ("contact force [N]", f"{self.contact_force:.3f}"),
            ("good_stable duration [s]", f"{self.good_stable_duration:.2f}"),
            ("detach recovery [s]", f"{self.detach_recovery:.2f}"),
            ("thickness [mm]", f"{self.thickness_mean:.3f} +/- {self.thickness_std:.3f}"),
            ("outcome", self.outcome),
        ]
        w = max(len(r[0]) for r in rows)
        return "\n".join(f"{k:<{w}}  {v}" for k, v in rows)


FIELDS = list(RunMetrics.__dataclass_fields__)


def compute_metrics(log, scenario=None):
    """Table-style tracking, contact and measurement figures of one run.

    ``scenario`` is accepted for interface symmetry; everything needed is
    in the log and its meta data.
    """
    if len(log) == 0:
        raise SchemaError("log has no rows")
    t = log.t
    phase = log.phase
    latched = log.col("contact_latched") > 0.5
    if not latched.any():
        raise NoContactPhase("contact was never latched in this run")

    err = log.vec("pr") - log.vec("p")
    win = np.isin(phase, [int(p) for p in INSPECTION_PHASES])
    rmse = np.sqrt(np.mean(err[win] ** 2, axis=0)) if win.any() else np.full(3, math.nan)

    pd_err = np.abs(log.vec("pd") - log.vec("p"))[latched]
    yz = pd_err[:, 1:].mean(axis=0)

    good = log.col("ut_quality") == 2
    force = float(np.mean(log.col("interface_force")[good])) if good.any() else math.nan
    seq = log.col("ut_seq")
    _, first = np.unique(seq[good], return_index=True)
    thick = log.col("ut_thickness")[good][first]
    ut_rate = float(log.meta.get("ut_rate", 10.0))
    good_duration = len(thick) / ut_rate

    recovery = _detach_recovery(t, phase, log.col("detach_event"), np.linalg.norm(err, axis=1))

    return RunMetrics(
        *map(float, rmse), *map(float, yz), force, good_duration, recovery,
        float(np.mean(thick)) if len(thick) else math.nan,
        float(np.std(thick)) if len(thick) > 1 else math.nan,
        str(log.meta.get("outcome", "unknown")),
        int(log.meta.get("seed", 0)),
    )


def empty_metrics(outcome, seed=0):
    """Placeholder row for runs without a contact phase."""
    nan = math.nan
    return RunMetrics(nan, nan, nan, nan, nan, nan, 0.0, nan, nan, nan, str(outcome), int(seed))


def _detach_recovery(t, phase, detach_event, err_norm):
    """Seconds from the probe release until the tracking error stays below 2 cm."""
    events = np.flatnonzero(detach_event > 0.5)
    if len(events):
        i0 = events[0]
    else:
        in_detach = np.flatnonzero(phase == int(Phase.DETACH))
        if not len(in_detach):
            return math.nan
        i0 = in_detach[0]
    after = np.flatnonzero(err_norm[i0:] >= RECOVERY_TOL)
    if not len(after):
        return 0.0
    last = i0 + after[-1]
    if last + 1 >= len(t):
        return math.inf
    return float(t[last + 1] - t[i0])


def metrics_to_csv(metrics_list):
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=FIELDS, lineterminator="\n")
    wr.writeheader()
    for m in metrics_list:
        wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in m.as_row().items()})
    return buf.getvalue()


def write_metrics(path, metrics_list):
    with open(path, "w", newline="") as fh:
        fh.write(metrics_to_csv(metrics_list))


def read_metrics(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        if set(row) != set(FIELDS):
            raise SchemaError(f"{path}: metrics columns differ from {FIELDS}")
        out.append(RunMetrics(**{k: _parse_field(k, row[k]) for k in FIELDS}))
    return out


def _parse_field(name, text):
    if name == "outcome":
        return text
    if name == "seed":
        return int(text)
    return float(text)


def read_baseline(path):
    """Partial metrics row (any subset of numeric fields) used for comparisons."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty baseline")
    unknown = set(rows[0]) - set(FIELDS)
    if unknown:
        raise SchemaError(f"{path}: unknown baseline fields {sorted(unknown)}")
    return {k: float(v) for k, v in rows[0].items() if k not in ("outcome", "seed") and v not in ("", None)}


def compare(metrics, baseline, tol):
    """Per-field deltas against a baseline. Returns ``[(field, value, base, delta, ok)]``."""
    out = []
    for k, base in baseline.items():
        val = getattr(metrics, k)
        delta = val - base
        out.append((k, val, base, delta, bool(abs(delta) <= tol)))
    return out
