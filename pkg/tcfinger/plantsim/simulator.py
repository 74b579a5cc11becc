"""
Tick-based simulator of the tank process.

Each tick runs, in order: PLC logic on the previous tick's measured levels
(with watermark delays), command overrides, actuator travel, first-order
flow lag, tank integration. Sensor noise is added after the loop and the
spoofing attacks are applied to the reported channels last.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from tcfinger.errors import ConfigError, IoError, SchemaError, UnsafeDelay
from tcfinger.fingerprint import operation_starts
from tcfinger.plantsim.scenario import PUMP, AttackSpec, DeviceParams, Scenario
from tcfinger.timeseries import ACTUATOR, SENSOR, ActuatorState, Dataset, TimeSeries
from tcfinger.watermark.delays import check_delay_bound, draw_delay
from tcfinger.watermark.critical import safe_delay_budget

OFF = int(ActuatorState.OFF)
ON = int(ActuatorState.ON)
TRAVEL = int(ActuatorState.TRAVEL)

OVERRIDE_TYPES = ("B1", "C1")
DEFAULT_MAX_WAIT_S = 1500.0
IDLE_GUARD_S = 10.0


class AttackRecord(BaseModel):
    """Where an attack actually landed; start/end are sample indices, end exclusive."""
    model_config = ConfigDict(extra="forbid")

    type: str
    targets: List[str]
    requested_start: int
    start_idx: int
    end_idx: int
    performed: bool
    no_op_attack: bool = False
    params: Dict[str, Union[float, str]] = Field(default_factory=dict)


class DelayRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    device_id: str
    trigger_idx: int
    execute_idx: int
    delay_samples: int
    command: int


class CriticalEvent(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tank: str
    idx: int
    level: float
    kind: str


class GroundTruthDocument(BaseModel):
    """JSON sidecar written next to a simulated dataset."""
    scenario: str
    seed: int
    sample_period_s: float
    jitter: Dict[str, str]
    attacks: List[AttackRecord]
    delays: List[DelayRecord]
    critical: List[CriticalEvent]


@dataclass
class GroundTruth:
    """
    Noise-free plant state behind a simulated Dataset.

    Attributes:
        levels / level_rates: true tank levels (mm) and net level rate (mm/s) per tank
        flows: true flow per flow sensor
        positions: valve openness / pump speed in [0, 1]
        status: reported actuator codes before any spoofing
        commands: command actually applied to each device (after overrides)
        attacks / delays / critical: event records
    """
    scenario: Scenario
    seed: int
    levels: Dict[str, np.ndarray] = field(default_factory=dict)
    level_rates: Dict[str, np.ndarray] = field(default_factory=dict)
    flows: Dict[str, np.ndarray] = field(default_factory=dict)
    positions: Dict[str, np.ndarray] = field(default_factory=dict)
    status: Dict[str, np.ndarray] = field(default_factory=dict)
    commands: Dict[str, np.ndarray] = field(default_factory=dict)
    attacks: List[AttackRecord] = field(default_factory=list)
    delays: List[DelayRecord] = field(default_factory=list)
    critical: List[CriticalEvent] = field(default_factory=list)

    @property
    def critical_state_reached(self) -> bool:
        return bool(self.critical)

    def attack_windows(self, performed_only: bool = True) -> List[Tuple[int, int]]:
        return [(a.start_idx, a.end_idx) for a in self.attacks if a.performed or not performed_only]

    def to_document(self) -> GroundTruthDocument:
        return GroundTruthDocument(
            scenario=self.scenario.name,
            seed=self.seed,
            sample_period_s=self.scenario.sample_period_s,
            jitter={d.device_id: f"{d.jitter_law}(std={d.jitter_std_s})" for d in self.scenario.devices},
            attacks=self.attacks,
            delays=self.delays,
            critical=self.critical,
        )


def save_ground_truth(truth: GroundTruth, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(truth.to_document().model_dump_json(indent=2))
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def load_ground_truth(path: str) -> GroundTruthDocument:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return GroundTruthDocument.model_validate(json.load(f))
    except FileNotFoundError as e:
        raise IoError(f"Ground truth file {path} not found") from e
    except (json.JSONDecodeError, ValueError) as e:
        raise ConfigError(f"Invalid ground truth file {path}: {e}") from e


@dataclass
class _Actuator:
    params: DeviceParams
    lag: float
    cmd: bool = False
    pos: float = 0.0
    start_pos: float = 0.0
    elapsed: int = 0
    duration: float = 1.0
    flow: float = 0.0

    def status(self) -> int:
        if self.params.kind == PUMP:
            return ON if self.cmd else OFF
        if self.cmd and self.pos >= 1.0:
            return ON
        if not self.cmd and self.pos <= 0.0:
            return OFF
        return TRAVEL


def check_scenario(scenario: Scenario) -> None:
    """Cross-checks that need more than the schema: the watermark delay budget."""
    policy = scenario.watermark
    if not policy.enabled:
        return
    try:
        check_delay_bound(policy, safe_delay_budget(scenario.tanks))
    except UnsafeDelay as e:
        raise ConfigError(f"Watermark policy is unsafe: {e}") from e


def _jitter(rng: np.random.Generator, device: DeviceParams) -> float:
    if device.jitter_std_s == 0:
        return 0.0
    if device.jitter_law == "uniform":
        half = math.sqrt(3.0) * device.jitter_std_s
        return float(rng.uniform(-half, half))
    return float(rng.normal(0.0, device.jitter_std_s))


def _override_plan(scenario: Scenario) -> Dict[str, List[AttackSpec]]:
    plan: Dict[str, List[AttackSpec]] = {}
    for attack in scenario.attacks:
        if attack.type in OVERRIDE_TYPES:
            plan.setdefault(attack.targets[0], []).append(attack)
    return plan


def simulate(scenario: Scenario, duration_s: float, seed: int) -> Tuple[Dataset, GroundTruth]:
    """
    Run the scenario for duration_s seconds.

    Args:
        scenario: Plant, control program, watermark policy and attack script
        duration_s: Simulated time
        seed: Seeds sensor noise and actuator jitter; the watermark has its own seed

    Returns:
        Reported Dataset (provenance "attacked" when the script has attacks) and its GroundTruth
    """
    check_scenario(scenario)
    dt = scenario.sample_period_s
    n = int(round(duration_s / dt))
    if n < 2:
        raise ConfigError(f"duration_s={duration_s} gives fewer than two samples")

    rng = np.random.default_rng(seed)
    watermark_rng = np.random.default_rng(scenario.watermark.seed)
    delay_budget = safe_delay_budget(scenario.tanks)

    tanks = scenario.tanks
    devices = {d.device_id: _Actuator(params=d, lag=math.exp(-dt / d.process_tau_s), cmd=d.initial_on) for d in scenario.devices}
    for act in devices.values():
        act.pos = act.start_pos = 1.0 if act.cmd else 0.0
        act.flow = act.params.max_flow if (act.cmd and act.params.interlock is None) else 0.0
    flow_devices = [d for d in scenario.devices if d.flow_sensor or d.feeds or d.drains]

    level_noise = rng.standard_normal((n, len(tanks))) * np.array([t.level_noise_std for t in tanks])
    sensored = [d for d in scenario.devices if d.flow_sensor]
    flow_noise = rng.standard_normal((n, len(sensored))) * np.array([d.sensor_noise_std for d in sensored])

    level_rules = [r for r in scenario.control if r.tank is not None]
    follow_rules = [r for r in scenario.control if r.follows is not None]
    plc_cmd = {d.device_id: d.initial_on for d in scenario.devices}
    latch = dict(plc_cmd)
    pending: Dict[str, Tuple[bool, int]] = {}

    overrides = _override_plan(scenario)
    override_state: Dict[int, bool] = {}
    override_records: Dict[int, bool] = {}

    truth = GroundTruth(scenario=scenario, seed=seed)
    levels = np.empty((n, len(tanks)))
    rates = np.empty((n, len(tanks)))
    flows = {d.device_id: np.empty(n) for d in flow_devices}
    positions = {name: np.empty(n) for name in devices}
    status = {name: np.empty(n, dtype=int) for name in devices}
    commands = {name: np.empty(n, dtype=int) for name in devices}

    level = np.array([t.initial_level for t in tanks], dtype=float)
    measured = level.copy()
    tank_index = {t.name: i for i, t in enumerate(tanks)}
    out_of_range = [False] * len(tanks)

    for k in range(n):
        # PLC scan on the previous tick's measurements
        for rule in level_rules:
            i = tank_index[rule.tank]  # type: ignore[index]
            tank = tanks[i]
            dev = rule.device_id
            if rule.action == "fill":
                if measured[i] <= tank.level_low_sp:
                    latch[dev] = True
                elif measured[i] >= tank.level_high_sp:
                    latch[dev] = False
            else:
                if measured[i] >= tank.level_high_sp:
                    latch[dev] = True
                elif measured[i] <= tank.level_low_sp:
                    latch[dev] = False

            target = pending[dev][0] if dev in pending else plc_cmd[dev]
            if latch[dev] != target:
                if latch[dev] == plc_cmd[dev]:
                    pending.pop(dev, None)
                elif scenario.watermark.enabled:
                    delay = draw_delay(scenario.watermark, delay_budget, watermark_rng, dt)
                    pending[dev] = (latch[dev], k + delay)
                    truth.delays.append(DelayRecord(device_id=dev, trigger_idx=k, execute_idx=k + delay, delay_samples=delay,
                                                    command=ON if latch[dev] else OFF))
                else:
                    plc_cmd[dev] = latch[dev]
            if dev in pending and pending[dev][1] <= k:
                plc_cmd[dev] = pending.pop(dev)[0]

        for rule in follow_rules:
            leader = devices[rule.follows]  # type: ignore[index]
            plc_cmd[rule.device_id] = leader.cmd and leader.pos >= 1.0

        # Applied commands and actuator travel
        for name, act in devices.items():
            wanted = plc_cmd[name]
            for attack in overrides.get(name, ()):
                if not (attack.start_idx <= k < attack.start_idx + attack.duration):
                    continue
                key = id(attack)
                if attack.type == "B1":
                    wanted = str(attack.params.get("command", "on")).lower() == "on"
                    if k == attack.start_idx:
                        override_records[key] = wanted == act.cmd
                else:
                    if k == attack.start_idx:
                        override_state[key] = not act.cmd
                        override_records[key] = False
                    period = max(1, int(round(float(attack.params.get("period_s", 3.0)) / dt)))
                    flips = ((k - attack.start_idx) // period) % 2
                    wanted = override_state[key] if flips == 0 else not override_state[key]
                break

            p = act.params
            if wanted != act.cmd:
                act.cmd = wanted
                act.start_pos = act.pos
                act.elapsed = 0
                base = p.open_time_s if wanted else p.close_time_s
                act.duration = max(base + _jitter(rng, p), dt)
            else:
                act.elapsed += 1
                step = act.elapsed * dt / act.duration
                if act.cmd:
                    act.pos = min(1.0, act.start_pos + step)
                else:
                    act.pos = max(0.0, act.start_pos - step)

        # Flow lag, interlocks
        inflow = np.zeros(len(tanks))
        outflow = np.zeros(len(tanks))
        for p in flow_devices:
            act = devices[p.device_id]
            gate = True
            if p.interlock is not None:
                gate = devices[p.interlock].pos >= 1.0
            if not gate:
                act.flow = 0.0
            else:
                target_flow = act.pos * p.max_flow
                act.flow = target_flow + (act.flow - target_flow) * act.lag
            flows[p.device_id][k] = act.flow
            if p.feeds is not None:
                inflow[tank_index[p.feeds]] += act.flow
            if p.drains is not None:
                outflow[tank_index[p.drains]] += act.flow

        # Tank integration
        for i, tank in enumerate(tanks):
            rate = tank.area * (inflow[i] - outflow[i])
            level[i] += rate * dt
            rates[k, i] = rate
            levels[k, i] = level[i]
            bad = level[i] < 0.0 or level[i] > tank.level_critical_high + scenario.critical_margin
            if bad and not out_of_range[i]:
                kind = "underflow" if level[i] < 0.0 else "overflow"
                truth.critical.append(CriticalEvent(tank=tank.name, idx=k, level=float(level[i]), kind=kind))
                logging.warning(f"Critical state reached: {tank.name} {kind} at sample {k} (level {level[i]:.1f} mm)")
            out_of_range[i] = bad
        measured = level + level_noise[k]

        for name, act in devices.items():
            positions[name][k] = act.pos
            status[name][k] = act.status()
            commands[name][k] = int(act.cmd)

    for i, tank in enumerate(tanks):
        truth.levels[tank.name] = levels[:, i]
        truth.level_rates[tank.name] = rates[:, i]
    for d in sensored:
        truth.flows[d.flow_sensor] = flows[d.device_id]  # type: ignore[index]
    truth.positions = positions
    truth.status = status
    truth.commands = commands

    reported: Dict[str, np.ndarray] = {}
    for i, tank in enumerate(tanks):
        reported[tank.level_sensor] = levels[:, i] + level_noise[:, i]
    for j, d in enumerate(sensored):
        reported[d.flow_sensor] = flows[d.device_id] + flow_noise[:, j]  # type: ignore[index]
    for name in devices:
        reported[name] = status[name].astype(float)

    for attack in scenario.attacks:
        if attack.type in OVERRIDE_TYPES:
            end = min(n, attack.start_idx + attack.duration)
            performed = attack.start_idx < n
            truth.attacks.append(AttackRecord(
                type=attack.type, targets=attack.targets, requested_start=attack.start_idx, start_idx=attack.start_idx,
                end_idx=end, performed=performed, no_op_attack=override_records.get(id(attack), False), params=attack.params,
            ))
        else:
            truth.attacks.append(_apply_spoof(attack, reported, scenario, dt))

    channels = []
    for tank in tanks:
        channels.append(TimeSeries(name=tank.level_sensor, kind=SENSOR, values=reported[tank.level_sensor], unit="mm"))
    for d in scenario.devices:
        states = (OFF, ON) if d.kind == PUMP else (TRAVEL, OFF, ON)
        channels.append(TimeSeries(name=d.device_id, kind=ACTUATOR, values=reported[d.device_id], states=states))
        if d.flow_sensor:
            channels.append(TimeSeries(name=d.flow_sensor, kind=SENSOR, values=reported[d.flow_sensor], unit="m3/h"))

    provenance = "attacked" if scenario.attacks else "simulated"
    ds = Dataset(channels=tuple(channels), sample_period_s=dt, start_time=0.0, provenance=provenance)
    logging.info(f"Simulated {scenario.name}: {n} samples, {len(truth.delays)} watermark delays, "
                 f"{sum(a.performed for a in truth.attacks)}/{len(truth.attacks)} attacks performed")
    return ds, truth


def _logistic(length: int, sigmoid_samples: float) -> np.ndarray:
    """Logistic ramp 0 -> 1 with midpoint at sigmoid_samples/2 and slope 10/sigmoid_samples."""
    t = np.arange(length, dtype=float)
    width = max(sigmoid_samples, 1e-9)
    return 1.0 / (1.0 + np.exp(-(10.0 / width) * (t - width / 2.0)))


def _next_operation(status: np.ndarray, start: int, max_wait: int) -> Optional[int]:
    for idx, _ in operation_starts(status):
        if idx >= start:
            return idx if idx <= start + max_wait else None
    return None


def _idle_start(status: np.ndarray, start: int, length: int, max_wait: int) -> Optional[int]:
    """First s >= start where the device reports OFF on [s-1, s+length)."""
    off = (status == OFF).astype(int)
    csum = np.concatenate(([0], np.cumsum(off)))
    span = length + 1
    last = min(start + max_wait, len(status) - length)
    for s in range(max(start, 1), last + 1):
        if csum[s - 1 + span] - csum[s - 1] == span:
            return s
    return None


def _apply_spoof(attack: AttackSpec, reported: Dict[str, np.ndarray], scenario: Scenario, dt: float) -> AttackRecord:
    n = len(next(iter(reported.values())))
    params = attack.params
    max_wait = int(round(float(params.get("max_wait_s", DEFAULT_MAX_WAIT_S)) / dt))

    def record(start: int, performed: bool) -> AttackRecord:
        end = min(n, start + attack.duration) if performed else start
        return AttackRecord(type=attack.type, targets=attack.targets, requested_start=attack.start_idx, start_idx=start,
                            end_idx=end, performed=performed, params=params)

    start = attack.start_idx
    if start >= n:
        return record(start, False)

    if attack.type == "A1":
        end = min(n, start + attack.duration)
        for sensor in attack.targets:
            value = params.get("value")
            reported[sensor][start:end] = reported[sensor][start] if value is None else float(value)
        return record(start, True)

    if attack.type == "F1":
        end = min(n, start + attack.duration)
        a, b = attack.targets
        swapped = reported[a][start:end].copy()
        reported[a][start:end] = reported[b][start:end]
        reported[b][start:end] = swapped
        return record(start, True)

    actuator, sensor = attack.targets
    if attack.type in ("D1", "D2"):
        s = _next_operation(reported[actuator].astype(int), start, max_wait)
        if s is None:
            logging.info(f"{attack.type} on {actuator}: no operation within {max_wait} samples of {start}, not performed")
            return record(start, False)
        end = min(n, s + attack.duration)
        v0 = reported[sensor][s]
        if attack.type == "D2":
            reported[sensor][s:end] = v0
        else:
            v1 = reported[sensor][end - 1]
            sigmoid = float(params.get("sigmoid_s", 20.0)) / dt
            reported[sensor][s:end] = v0 + (v1 - v0) * _logistic(end - s, sigmoid)
        return record(s, True)

    # E1: fake an ON operation while the device idles
    guard = int(round(IDLE_GUARD_S / dt))
    s = _idle_start(reported[actuator].astype(int), start, attack.duration + guard, max_wait)
    if s is None:
        logging.info(f"E1 on {actuator}: no idle window within {max_wait} samples of {start}, not performed")
        return record(start, False)
    end = min(n, s + attack.duration)
    device = scenario.device(actuator)
    level = float(params.get("level", device.max_flow))
    sigmoid = float(params.get("sigmoid_s", 20.0)) / dt
    v0 = reported[sensor][s]
    reported[actuator][s:end] = ON
    reported[sensor][s:end] = v0 + (level - v0) * _logistic(end - s, sigmoid)
    return record(s, True)


def replay_attack(ds_recorded: Dataset, live: Dataset, windows: Sequence[Tuple[int, int]]) -> Dataset:
    """
    Substitute the recorded trace for the live one inside each [start, end) window.

    Raises:
        SchemaError: the datasets do not share channels, kinds, period, or the recording is too short
    """
    if ds_recorded.schema() != live.schema():
        raise SchemaError("Recorded and live datasets have different schemas")
    if not math.isclose(ds_recorded.sample_period_s, live.sample_period_s, rel_tol=1e-12):
        raise SchemaError("Recorded and live datasets have different sample periods")
    updates = {name: live.values(name).copy() for name in live.names}
    for start, end in windows:
        if not (0 <= start < end <= len(live)) or end > len(ds_recorded):
            raise SchemaError(f"Replay window [{start}, {end}) does not fit both datasets")
        for name in live.names:
            updates[name][start:end] = ds_recorded.values(name)[start:end]
    return live.with_values(updates, provenance="replayed")
