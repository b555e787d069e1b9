"""Simulation configuration: typed sections loaded from TOML.

Every section maps onto a frozen dataclass; unknown keys are rejected so a
typo in a config file fails loudly instead of silently using a default.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields, replace

import tomli

from .fis import ERROR_LABELS, SLIP_LABELS
from .motor import MotorParams, combined_inertia
from .plant import AxleTires, TireParams, VehicleParams
from .scenarios import DLCGeometry, DriverParams

__all__ = [
    "ConfigError",
    "SimSection",
    "ObserverConfig",
    "EstimationConfig",
    "FISConfig",
    "ControlConfig",
    "TrackConfig",
    "SimConfig",
    "load_config",
    "config_from_dict",
]


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class SimSection:
    scenario: str = "track"
    speed_kmh: float = 40.0
    fis: bool = True
    dt: float = 0.005
    duration: float = 30.0
    substeps: int = 4
    # integer multiplier on the substep count (convergence checks)
    refine: int = 1
    v0: float = 0.0
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        if self.scenario not in ("track", "dlc"):
            raise ConfigError(f"scenario must be 'track' or 'dlc', got {self.scenario!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.duration < 0:
            raise ConfigError("duration must be non-negative")
        if self.v0 < 0:
            raise ConfigError("initial speed must be non-negative")
        if self.substeps < 1 or self.refine < 1:
            raise ConfigError("substeps and refine must be at least 1")
        if self.scenario == "dlc" and not self.speed_kmh > 0:
            raise ConfigError("dlc needs a positive test speed")


@dataclass(frozen=True)
class ObserverConfig:
    omega_c: float = 50.0
    diff_omega_c: float = 100.0
    omega_min: float = 1.0
    # cornering resistance and contact-point offset terms in the slip estimator
    full_resistance: bool = True
    coast_reset: bool = True


@dataclass(frozen=True)
class EstimationConfig:
    C_f0: float = 1.0e4
    C_r0: float = 1.0e4
    Gamma0: float = 1.0e6
    R_meas: float = 1.0e4
    omega_c: float = 50.0
    C_min: float = 1.0e3
    C_max: float = 1.0e5
    poles: tuple = (-15.0, -20.0)
    v_min: float = 3.0
    # lateral acceleration below which the stiffness update is skipped
    ay_min: float = 1.0
    steer_margin: float = 1.0e-3
    # |gamma_des| <= friction_limit*mu*g/v; 0 disables the cap
    friction_limit: float = 0.85
    eps: float = 0.1


@dataclass(frozen=True)
class FISConfig:
    lambda_norm: float = 0.2
    gamma_err_norm: float = 0.12
    k_fis: float = 0.8
    mode: str = "additive"
    slip_peaks: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    error_peaks: tuple = (-1.0, -0.5, 0.0, 0.5, 1.0)
    output_peaks: tuple = (-1.0, -0.5, 0.0, 0.5, 1.0)
    rules_left: dict = None
    rules_right: dict = None
    # additive trims are scaled by this voltage; 0 means the full-current
    # drop R*I_max across the winding
    additive_unit: float = 0.0

    def __post_init__(self):
        if self.mode not in ("multiplicative", "additive"):
            raise ConfigError(f"unknown correction mode {self.mode!r}")
        if self.lambda_norm <= 0 or self.gamma_err_norm <= 0:
            raise ConfigError("normalisation bounds must be positive")
        for name in ("rules_left", "rules_right"):
            table = getattr(self, name)
            if table is None:
                continue
            if not isinstance(table, dict) or set(table) != set(SLIP_LABELS):
                raise ConfigError(f"{name} needs one row per slip set {SLIP_LABELS}")
            for row in table.values():
                if len(row) != len(ERROR_LABELS) or not set(row) <= set(ERROR_LABELS):
                    raise ConfigError(f"{name} rows need {len(ERROR_LABELS)} labels "
                                      f"from {ERROR_LABELS}")


@dataclass(frozen=True)
class ControlConfig:
    yaw_kp: float = 200.0
    yaw_ki: float = 50.0
    yaw_limit: float = 1000.0
    slip_kp: float = 48.0
    slip_ki: float = 2000.0
    slip_kd: float = 0.0
    lambda_ref: float = 0.1
    coast_floor: str = "backemf"
    coast_floor_frac: float = 0.05
    slip_schedule: str = "backemf"
    schedule_floor: float = 0.02
    slip_release: str = "bleed"

    def __post_init__(self):
        if self.coast_floor not in ("backemf", "fraction", "none"):
            raise ConfigError(f"unknown coast floor {self.coast_floor!r}")
        if self.slip_schedule not in ("backemf", "none"):
            raise ConfigError(f"unknown slip schedule {self.slip_schedule!r}")
        if self.slip_release not in ("bleed", "freeze"):
            raise ConfigError(f"unknown slip release {self.slip_release!r}")


@dataclass(frozen=True)
class TrackConfig:
    csv: str = ""


@dataclass(frozen=True)
class SimConfig:
    sim: SimSection = field(default_factory=SimSection)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    tires: AxleTires = field(default_factory=AxleTires)
    motor: MotorParams = field(default_factory=MotorParams)
    observer: ObserverConfig = field(default_factory=ObserverConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    fis: FISConfig = field(default_factory=FISConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    driver: DriverParams = field(default_factory=DriverParams)
    dlc: DLCGeometry = field(default_factory=DLCGeometry)
    track: TrackConfig = field(default_factory=TrackConfig)

    @property
    def speed(self) -> float:
        return self.sim.speed_kmh / 3.6

    def with_sim(self, **kw) -> "SimConfig":
        return replace(self, sim=replace(self.sim, **kw))


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {', '.join(unknown)}")
    kw = {}
    for k, v in data.items():
        default = getattr(cls(), k) if _has_defaults(cls) else None
        if isinstance(v, list):
            v = tuple(v)
        if isinstance(default, bool) and not isinstance(v, bool):
            raise ConfigError(f"[{where}] {k} must be a boolean")
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"[{where}] {k} must be numeric")
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(f"[{where}] {k} must be finite")
            if isinstance(default, float):
                v = float(v)
        if isinstance(default, str) and not isinstance(v, str):
            raise ConfigError(f"[{where}] {k} must be a string")
        kw[k] = v
    try:
        return cls(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def _has_defaults(cls) -> bool:
    return all(f.default is not dataclasses.MISSING or f.default_factory is not dataclasses.MISSING
               for f in fields(cls))


def config_from_dict(data: dict) -> SimConfig:
    """Assemble a :class:`SimConfig` from parsed TOML tables."""
    data = dict(data)
    known = {"sim", "vehicle", "tire", "motor", "observer", "estimation", "fis",
             "control", "driver", "dlc", "track"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")
    cfg = SimConfig()
    kw = {}
    simple = {"sim": SimSection, "vehicle": VehicleParams, "observer": ObserverConfig,
              "estimation": EstimationConfig, "fis": FISConfig, "control": ControlConfig,
              "driver": DriverParams, "dlc": DLCGeometry, "track": TrackConfig}
    for name, cls in simple.items():
        if name in data:
            kw[name] = _build(cls, data[name], name)
    if "tire" in data:
        t = data["tire"]
        if not isinstance(t, dict) or set(t) - {"front", "rear"}:
            raise ConfigError("[tire] may only contain [tire.front] and [tire.rear]")
        base = cfg.tires
        front = _merge(TireParams, base.front, t.get("front", {}), "tire.front")
        rear = _merge(TireParams, base.rear, t.get("rear", {}), "tire.rear")
        kw["tires"] = AxleTires(front, rear)
    vehicle = kw.get("vehicle", cfg.vehicle)
    if "motor" in data:
        m = dict(data["motor"])
        if "J" in m:
            raise ConfigError("[motor] J is derived from J_m, J_w and G; do not set it")
        motor = _build(MotorParams, m, "motor")
    else:
        motor = cfg.motor
    motor = replace(motor, J=combined_inertia(motor.J_m, vehicle.J_w, vehicle.G))
    kw["motor"] = motor
    out = replace(cfg, **kw)
    if out.estimation.poles[0] >= 0 or out.estimation.poles[1] >= 0:
        raise ConfigError("observer poles must be negative")
    if out.sim.dt * out.observer.omega_c >= 2.0:
        raise ConfigError("dt*omega_c of the disturbance observer must stay below 2")
    return out


def _merge(cls, base, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = sorted(set(data) - {f.name for f in fields(cls)})
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {', '.join(unknown)}")
    try:
        return replace(base, **{k: float(v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def load_config(path) -> SimConfig:
    """Read a TOML file; missing keys fall back to the defaults."""
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)
