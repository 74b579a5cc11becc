"""
Scenario schema for the plant simulator.

Scenarios are JSON documents validated by pydantic; cross-field rules live in
model validators so a bad document fails before any simulation starts.
"""

import json
import zlib
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from tcfinger.errors import ConfigError, IoError
from tcfinger.timeseries import ACTUATOR, SENSOR, ChannelSpec

VALVE = "motorized_valve"
PUMP = "pump"

# Nominal full-travel (valve) / spin-up (pump) times before per-device spread
NOMINAL_OPEN_S = {VALVE: 10.0, PUMP: 3.0}
CLOSE_TO_OPEN = 1.15

ATTACK_TYPES = ("A1", "B1", "C1", "D1", "D2", "E1", "F1")


class DeviceParams(BaseModel):
    """
    One actuator and the flow it drives.

    Attributes:
        device_id: Name of the actuator channel (MV101, P101, ...)
        kind: motorized_valve or pump
        open_time_s / close_time_s: full travel time (valves) or spin-up/down time (pumps)
        jitter_std_s: per-operation timing jitter
        jitter_law: gaussian or uniform (same standard deviation)
        process_tau_s: first-order lag of the driven flow
        max_flow: flow at full openness/speed (m3/h)
        flow_sensor: reported flow channel, None for inline valves
        interlock: valve that must be fully open before a pump can deliver flow
        feeds / drains: tank receiving / losing this device's flow
        initial_on: commanded state at t=0
    """
    model_config = ConfigDict(extra="forbid")

    device_id: str
    kind: Literal["motorized_valve", "pump"]
    open_time_s: float = Field(gt=0)
    close_time_s: float = Field(gt=0)
    jitter_std_s: float = Field(default=0.3, ge=0)
    jitter_law: Literal["gaussian", "uniform"] = "gaussian"
    process_tau_s: float = Field(default=4.0, gt=0)
    max_flow: float = Field(default=2.4, gt=0)
    flow_sensor: Optional[str] = None
    sensor_noise_std: float = Field(default=0.01, ge=0)
    interlock: Optional[str] = None
    feeds: Optional[str] = None
    drains: Optional[str] = None
    initial_on: bool = False

    @model_validator(mode="after")
    def _check_jitter(self) -> "DeviceParams":
        if self.jitter_std_s >= self.open_time_s / 3:
            raise ValueError(f"{self.device_id}: jitter_std_s must be below open_time_s/3")
        return self


class TankParams(BaseModel):
    """
    A level-controlled tank.

    area is the level rate (mm/s) produced by one m3/h of net inflow.
    """
    model_config = ConfigDict(extra="forbid")

    name: str
    level_sensor: str
    initial_level: float = 650.0
    area: float = Field(default=0.2, gt=0)
    level_low_sp: float = 500.0
    level_high_sp: float = 800.0
    level_critical_high: float = 1000.0
    level_critical_low: float = 150.0
    max_in_rate: float = Field(default=0.48, gt=0)
    max_out_rate: float = Field(default=0.47, gt=0)
    level_noise_std: float = Field(default=1.0, ge=0)

    @model_validator(mode="after")
    def _check_setpoints(self) -> "TankParams":
        if not (self.level_critical_low < self.level_low_sp < self.level_high_sp < self.level_critical_high):
            raise ValueError(f"{self.name}: set-points must satisfy critical_low < low < high < critical_high")
        return self

    @property
    def delta_high(self) -> float:
        return self.level_critical_high - self.level_high_sp

    @property
    def delta_low(self) -> float:
        return self.level_low_sp - self.level_critical_low


class ControlRule(BaseModel):
    """
    PLC rule for one device.

    fill: ON when level <= low set-point, OFF when level >= high set-point.
    drain: ON when level >= high set-point, OFF when level <= low set-point.
    follows: the device is commanded with its leader once the leader is fully open.
    """
    model_config = ConfigDict(extra="forbid")

    device_id: str
    tank: Optional[str] = None
    action: Literal["fill", "drain"] = "fill"
    follows: Optional[str] = None

    @model_validator(mode="after")
    def _check_source(self) -> "ControlRule":
        if (self.tank is None) == (self.follows is None):
            raise ValueError(f"Rule for {self.device_id} needs exactly one of tank / follows")
        return self


class WatermarkPolicy(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = False
    delay_min_s: float = Field(default=5.0, ge=0)
    delay_max_s: float = Field(default=35.0, ge=0)
    seed: int = 0
    granularity_s: float = Field(default=1.0, gt=0)
    safety_fraction: float = Field(default=0.5, gt=0, le=1)

    @model_validator(mode="after")
    def _check_bounds(self) -> "WatermarkPolicy":
        if self.delay_min_s > self.delay_max_s:
            raise ValueError("delay_min_s must not exceed delay_max_s")
        return self


_ARITY = {"A1": (1, 8), "B1": (1, 1), "C1": (1, 1), "D1": (2, 2), "D2": (2, 2), "E1": (2, 2), "F1": (2, 2)}


class AttackSpec(BaseModel):
    """
    One scripted attack.

    Per-type params:
        A1: value (spoofed constant; the sensor is frozen at its last reading when absent)
        B1: command ("on"/"off")
        C1: period_s (toggle period)
        D1: sigmoid_s (attacker-chosen transition duration), max_wait_s
        D2: max_wait_s
        E1: sigmoid_s, level (spoofed steady value), max_wait_s
    Targets: A1 sensors; B1/C1 one actuator; D1/D2/E1 [actuator, sensor]; F1 two sensors.
    """
    model_config = ConfigDict(extra="forbid")

    type: Literal["A1", "B1", "C1", "D1", "D2", "E1", "F1"]
    targets: List[str]
    start_idx: int = Field(ge=0)
    duration: int = Field(gt=0)
    params: Dict[str, Union[float, str]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_arity(self) -> "AttackSpec":
        low, high = _ARITY[self.type]
        if not (low <= len(self.targets) <= high):
            raise ValueError(f"{self.type} needs {low}..{high} targets, got {len(self.targets)}")
        return self


class Scenario(BaseModel):
    """Plant configuration, control program, watermark policy and attack script."""
    model_config = ConfigDict(extra="forbid")

    name: str = "default"
    sample_period_s: float = Field(default=1.0, gt=0)
    tanks: List[TankParams]
    devices: List[DeviceParams]
    control: List[ControlRule]
    watermark: WatermarkPolicy = Field(default_factory=WatermarkPolicy)
    attacks: List[AttackSpec] = Field(default_factory=list)
    critical_margin: float = Field(default=100.0, ge=0)

    @model_validator(mode="after")
    def _check_references(self) -> "Scenario":
        tanks = {t.name for t in self.tanks}
        devices = {d.device_id: d for d in self.devices}
        if len(devices) != len(self.devices):
            raise ValueError("device_id values must be unique")
        for d in self.devices:
            for ref in (d.feeds, d.drains):
                if ref is not None and ref not in tanks:
                    raise ValueError(f"{d.device_id} references unknown tank {ref}")
            if d.interlock is not None:
                if d.interlock not in devices or devices[d.interlock].kind != VALVE:
                    raise ValueError(f"{d.device_id} interlock must name a valve")
        ruled = set()
        for rule in self.control:
            if rule.device_id not in devices:
                raise ValueError(f"Control rule for unknown device {rule.device_id}")
            if rule.tank is not None and rule.tank not in tanks:
                raise ValueError(f"Control rule for {rule.device_id} references unknown tank {rule.tank}")
            if rule.follows is not None and rule.follows not in devices:
                raise ValueError(f"{rule.device_id} follows unknown device {rule.follows}")
            ruled.add(rule.device_id)
        channels = self.channel_names()
        for attack in self.attacks:
            for target in attack.targets:
                if target not in channels:
                    raise ValueError(f"Attack {attack.type} targets unknown channel {target}")
        return self

    def device(self, device_id: str) -> DeviceParams:
        for d in self.devices:
            if d.device_id == device_id:
                return d
        raise ConfigError(f"Unknown device {device_id}")

    def tank(self, name: str) -> TankParams:
        for t in self.tanks:
            if t.name == name:
                return t
        raise ConfigError(f"Unknown tank {name}")

    def channel_names(self) -> List[str]:
        names = [t.level_sensor for t in self.tanks]
        for d in self.devices:
            names.append(d.device_id)
            if d.flow_sensor:
                names.append(d.flow_sensor)
        return names

    def schema(self) -> Dict[str, ChannelSpec]:
        """Channel specs matching the Dataset simulate() produces, for ingesting CSV dumps."""
        specs = {t.level_sensor: ChannelSpec(kind=SENSOR, unit="mm") for t in self.tanks}
        for d in self.devices:
            states = (1, 2) if d.kind == PUMP else (0, 1, 2)
            specs[d.device_id] = ChannelSpec(kind=ACTUATOR, states=states)
            if d.flow_sensor:
                specs[d.flow_sensor] = ChannelSpec(kind=SENSOR, unit="m3/h")
        return specs

    def pairings(self) -> Dict[str, str]:
        """Actuator -> flow sensor it drives (inline valves map to their interlocked pump's sensor)."""
        pairs = {d.device_id: d.flow_sensor for d in self.devices if d.flow_sensor}
        for d in self.devices:
            if d.interlock and d.flow_sensor and d.interlock not in pairs:
                pairs[d.interlock] = d.flow_sensor
        return pairs


def build_scenario(data: dict) -> Scenario:
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid scenario: {e}") from e


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise IoError(f"Scenario file {path} not found") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Scenario file {path} contains invalid JSON: {e}") from e
    return build_scenario(data)


def save_scenario(scenario: Scenario, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(scenario.model_dump_json(indent=2))
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def nominal_device(kind: str, device_id: str, spread: float = 0.08, seed: int = 0, **overrides) -> DeviceParams:
    """
    Device whose nominal open/close times are drawn once from +-spread around the type nominal.

    The draw depends only on (seed, device_id), so a device keeps its timing across runs.
    """
    rng = np.random.default_rng([seed, zlib.crc32(device_id.encode("utf-8"))])
    open_time = NOMINAL_OPEN_S[kind] * (1.0 + rng.uniform(-spread, spread))
    close_time = CLOSE_TO_OPEN * open_time * (1.0 + rng.uniform(-spread, spread) / 4)
    fields = {"device_id": device_id, "kind": kind, "open_time_s": float(open_time), "close_time_s": float(close_time)}
    fields.update(overrides)
    return DeviceParams(**fields)


def default_scenario(watermark: Optional[WatermarkPolicy] = None, attacks: Optional[List[AttackSpec]] = None) -> Scenario:
    """
    Two-stage raw-water story.

    Stage 1: MV101 fills T101 (FIT101, LIT101); P101 pumps T101 into T301 (FIT201)
    through the inline valve MV201, interlocked with it.
    Stage 2: P302 drains T301 (FIT301, LIT301).
    """
    return Scenario(
        name="default",
        tanks=[
            TankParams(name="T101", level_sensor="LIT101", initial_level=650.0, area=0.2, max_in_rate=0.48, max_out_rate=0.47),
            TankParams(name="T301", level_sensor="LIT301", initial_level=650.0, area=0.25, max_in_rate=0.5875, max_out_rate=0.5),
        ],
        devices=[
            DeviceParams(device_id="MV101", kind=VALVE, open_time_s=9.0, close_time_s=10.35, jitter_std_s=0.4, process_tau_s=4.0,
                         max_flow=2.4, flow_sensor="FIT101", feeds="T101"),
            DeviceParams(device_id="MV201", kind=VALVE, open_time_s=11.0, close_time_s=12.65, jitter_std_s=0.4, process_tau_s=1.0),
            DeviceParams(device_id="P101", kind=PUMP, open_time_s=3.0, close_time_s=3.45, jitter_std_s=0.2, process_tau_s=3.0,
                         max_flow=2.35, flow_sensor="FIT201", interlock="MV201", drains="T101", feeds="T301"),
            DeviceParams(device_id="P302", kind=PUMP, open_time_s=4.0, close_time_s=4.6, jitter_std_s=0.3, process_tau_s=2.5,
                         max_flow=2.0, flow_sensor="FIT301", drains="T301", initial_on=True),
        ],
        control=[
            ControlRule(device_id="MV101", tank="T101", action="fill"),
            ControlRule(device_id="MV201", tank="T301", action="fill"),
            ControlRule(device_id="P101", follows="MV201"),
            ControlRule(device_id="P302", tank="T301", action="drain"),
        ],
        watermark=watermark or WatermarkPolicy(),
        attacks=list(attacks or []),
    )
