"""Scenario configuration: TOML loading, defaults and dotted overrides."""
import copy
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .admittance import AdmittanceConfig
from .contact import ProbeSpec, SurfaceSpec, UTQualityConfig
from .controller import ControllerGains
from .errors import ConfigError
from .mission import InspectionRequest, MissionConfig
from .observer import ObserverConfig
from .trajectory import TrajectoryLimits
from .vehicle import NoiseConfig, VehicleParams


@dataclass
class RunConfig:
    seed: int = 0
    duration: float = 60.0
    physics_rate: float = 1000.0
    control_rate: float = 200.0
    log_rate: float = 100.0
    initial_position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.3, 0.9]))
    initial_yaw: float = 0.0
    f_disturbance: np.ndarray = field(default_factory=lambda: np.zeros(3))
    stop_after_terminal: float = 1.5  # s of tail logged after Done/Aborted; < 0 runs to duration

    def __post_init__(self):
        self.initial_position = np.asarray(self.initial_position, dtype=float)
        self.f_disturbance = np.asarray(self.f_disturbance, dtype=float)
        if self.duration <= 0 or self.physics_rate <= 0:
            raise ValueError("duration and physics_rate must be positive")


@dataclass
class MissionRequestConfig:
    enabled: bool = True
    t_start: float = 1.0
    inspection_point: np.ndarray | None = None  # defaults to the surface point
    inspection_normal: np.ndarray | None = None  # defaults to the surface normal


SECTIONS = {
    "vehicle": VehicleParams,
    "noise": NoiseConfig,
    "surface": SurfaceSpec,
    "probe": ProbeSpec,
    "ut": UTQualityConfig,
    "observer": ObserverConfig,
    "admittance": AdmittanceConfig,
    "gains": ControllerGains,
    "trajectory": TrajectoryLimits,
    "mission": MissionConfig,
    "run": RunConfig,
}
# keys that are filled from other sections, never read from the file
_DERIVED = {"gains": {"m", "g"}}
_REQUEST_KEYS = {f.name for f in dataclasses.fields(MissionRequestConfig)}


@dataclass
class Scenario:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    surface: SurfaceSpec = field(default_factory=SurfaceSpec)
    probe: ProbeSpec = field(default_factory=ProbeSpec)
    ut: UTQualityConfig = field(default_factory=UTQualityConfig)
    observer: ObserverConfig = field(default_factory=ObserverConfig)
    admittance: AdmittanceConfig = field(default_factory=AdmittanceConfig)
    gains: ControllerGains = field(default_factory=ControllerGains)
    trajectory: TrajectoryLimits = field(default_factory=TrajectoryLimits)
    mission: MissionConfig = field(default_factory=MissionConfig)
    run: RunConfig = field(default_factory=RunConfig)
    request_cfg: MissionRequestConfig = field(default_factory=MissionRequestConfig)
    defaulted: list = field(default_factory=list)
    source: str | None = None

    def __post_init__(self):
        self.gains.m = self.vehicle.m
        self.gains.g = self.vehicle.g
        self.check_rates()

    @property
    def request(self):
        rc = self.request_cfg
        if not rc.enabled:
            return None
        point = self.surface.point if rc.inspection_point is None else rc.inspection_point
        normal = self.surface.normal if rc.inspection_normal is None else rc.inspection_normal
        return InspectionRequest(point, normal)

    @property
    def rates(self):
        return {
            "physics": self.run.physics_rate,
            "control": self.run.control_rate,
            "observer": self.observer.rate,
            "planner": self.admittance.rate,
            "ut": self.ut.rate,
            "log": self.run.log_rate,
        }

    def divisor(self, name):
        return int(round(self.run.physics_rate / self.rates[name]))

    def check_rates(self):
        phys = self.run.physics_rate
        for name, rate in self.rates.items():
            ratio = phys / rate
            if rate <= 0 or ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(f"physics rate {phys:g} Hz is not an integer multiple of {name} rate {rate:g} Hz")

    def replace(self, **sections):
        new = copy.deepcopy(self)
        for k, v in sections.items():
            setattr(new, k, v)
        new.__post_init__()
        return new

    def with_seed(self, seed):
        return self.replace(run=dataclasses.replace(self.run, seed=int(seed)))

    def hover_variant(self, mass, duration):
        """Contact-free hover with the plant and controller mass set to ``mass``."""
        new = copy.deepcopy(self)
        new.vehicle.m = float(mass)
        new.request_cfg.enabled = False
        new.run.duration = float(duration)
        new.run.f_disturbance = np.zeros(3)
        new.run.stop_after_terminal = -1.0
        new.__post_init__()
        return new


def default_scenario(**run_overrides):
    sc = Scenario()
    if run_overrides:
        sc = sc.replace(run=dataclasses.replace(sc.run, **run_overrides))
    return sc


def noiseless(scenario):
    return scenario.replace(noise=NoiseConfig.noiseless())


# -- loading ---------------------------------------------------------------

def _locate(text, section, key=None):
    """1-based line number of ``[section]`` / ``key`` in TOML source, or None."""
    if text is None:
        return None
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("[") and line.endswith("]"):
            current = line.strip("[]").strip()
            if key is None and current == section:
                return i
        elif key is not None and current == section and "=" in line:
            if line.split("=", 1)[0].strip() == key:
                return i
    return None


def _where(path, text, section, key=None):
    line = _locate(text, section, key)
    name = path or "<scenario>"
    item = section if key is None else f"{section}.{key}"
    return f"{name}:{line}: {item}" if line else f"{name}: {item}"


def _coerce(value, default, where):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, np.ndarray) or default is None:
        try:
            arr = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number or list of numbers, got {value!r}") from None
        if default is not None and arr.ndim != 0 and arr.shape != default.shape:
            raise ConfigError(f"{where}: expected shape {default.shape}, got {arr.shape}")
        if default is not None and arr.ndim == 0:
            arr = np.broadcast_to(arr, default.shape).copy()
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"{where}: values must be finite")
        return arr
    return value


def _build_section(cls, values, path, text, section, defaulted):
    defaults = cls()
    kwargs = {}
    skip = _DERIVED.get(section, set())
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        if f.name in values:
            kwargs[f.name] = _coerce(values[f.name], getattr(defaults, f.name), _where(path, text, section, f.name))
        else:
            defaulted.append(f"{section}.{f.name}")
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{_where(path, text, section)}: {exc}") from None


def parse_override(item):
    """``section.key=value`` with the value parsed as a TOML literal."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    lhs, rhs = item.split("=", 1)
    parts = lhs.strip().split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"override {item!r}: key must be section.key")
    try:
        value = tomllib.loads(f"v = {rhs.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = rhs.strip()
    return parts[0], parts[1], value


def scenario_from_dict(raw, path=None, text=None, overrides=()):
    raw = copy.deepcopy(raw)
    for item in overrides:
        section, key, value = parse_override(item)
        raw.setdefault(section, {})[key] = value

    for section, values in raw.items():
        if section not in SECTIONS:
            raise ConfigError(f"{_where(path, text, section)}: unknown section")
        if not isinstance(values, dict):
            raise ConfigError(f"{_where(path, text, section)}: must be a table")
        allowed = {f.name for f in dataclasses.fields(SECTIONS[section])} - _DERIVED.get(section, set())
        if section == "mission":
            allowed |= _REQUEST_KEYS
        for key in values:
            if key not in allowed:
                raise ConfigError(f"{_where(path, text, section, key)}: unknown key")

    defaulted = []
    built = {}
    for section, cls in SECTIONS.items():
        values = dict(raw.get(section, {}))
        if section == "mission":
            req_values = {k: values.pop(k) for k in list(values) if k in _REQUEST_KEYS}
            built["request_cfg"] = _build_section(MissionRequestConfig, req_values, path, text, section, [])
        built[section] = _build_section(cls, values, path, text, section, defaulted)
    try:
        sc = Scenario(**built, defaulted=defaulted, source=path)
        sc.request  # validates the inspection pose
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path or '<scenario>'}: {exc}") from None
    return sc


def load_scenario(path, overrides=()):
    """Read a TOML scenario; missing keys take the documented defaults."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read scenario ({exc.strerror})") from None
    text = data.decode("utf-8", errors="replace")
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(raw, path=str(path), text=text, overrides=overrides)


def describe_defaults(scenario, keys=("vehicle.m", "vehicle.c_f")):
    """Human-readable note of notable defaulted parameters."""
    notes = []
    for key in keys:
        if key in scenario.defaulted:
            section, name = key.split(".")
            val = getattr(getattr(scenario, section), name)
            notes.append(f"{key} = {val:g} (default)" if isinstance(val, float) and math.isfinite(val)
                         else f"{key} = {val} (default)")
    return notes
