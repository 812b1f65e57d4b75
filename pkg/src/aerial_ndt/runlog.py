"""Columnar run log and its CSV round trip."""
import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError


def _xyz(prefix):
    return [f"{prefix}_{a}" for a in "xyz"]


COLUMNS = (
    ["t", "phase"]
    + _xyz("p") + _xyz("v") + ["psi"]
    + _xyz("pr") + _xyz("vr") + ["yaw_r", "ref_t"]
    + _xyz("pd") + ["yaw_d"]
    + _xyz("fext") + _xyz("fhat") + _xyz("ffilt") + _xyz("fcorr") + _xyz("bias")
    + ["w1", "w2", "w3", "w4"]
    + ["attached", "compression", "interface_force", "gap", "slip", "couplant_age", "detach_event"]
    + ["ut_quality", "ut_thickness", "ut_seq", "contact_latched"]
)
INDEX = {name: i for i, name in enumerate(COLUMNS)}
META_PREFIX = "# meta: "


@dataclass
class RunLog:
    data: np.ndarray
    meta: dict = field(default_factory=dict)
    columns: tuple = tuple(COLUMNS)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.columns))
        self._index = {name: i for i, name in enumerate(self.columns)}

    def __len__(self):
        return self.data.shape[0]

    def col(self, name):
        try:
            return self.data[:, self._index[name]]
        except KeyError:
            raise SchemaError(f"log has no column {name!r}") from None

    def vec(self, prefix):
        return np.column_stack([self.col(f"{prefix}_{a}") for a in "xyz"])

    @property
    def t(self):
        return self.col("t")

    @property
    def phase(self):
        return self.col("phase").astype(int)


class LogBuffer:
    """Preallocated row buffer, trimmed on :meth:`finish`."""

    def __init__(self, capacity):
        self.rows = np.full((max(int(capacity), 1), len(COLUMNS)), np.nan)
        self.n = 0

    def next_row(self):
        if self.n == self.rows.shape[0]:
            self.rows = np.vstack([self.rows, np.full_like(self.rows, np.nan)])
        row = self.rows[self.n]
        self.n += 1
        return row

    def finish(self, meta):
        return RunLog(self.rows[:self.n].copy(), meta)


def write_csv(log, path):
    with open(path, "w", newline="") as fh:
        fh.write(META_PREFIX + json.dumps(log.meta, sort_keys=True) + "\n")
        fh.write(",".join(log.columns) + "\n")
        np.savetxt(fh, log.data, delimiter=",", fmt="%.9g")


def read_csv(path):
    """Read a log written by :func:`write_csv`; checks the column set."""
    meta = {}
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.startswith(META_PREFIX):
            try:
                meta = json.loads(first[len(META_PREFIX):])
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: bad meta line ({exc})") from None
            header = fh.readline()
        else:
            header = first
        columns = next(csv.reader([header.strip()]), [])
        missing = [c for c in COLUMNS if c not in columns]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise SchemaError(f"{path}: {exc}") from None
    if data.size == 0:
        data = np.empty((0, len(columns)))
    if data.shape[1] != len(columns):
        raise SchemaError(f"{path}: rows have {data.shape[1]} fields, header has {len(columns)}")
    order = [columns.index(c) for c in COLUMNS]
    return RunLog(data[:, order], meta)
