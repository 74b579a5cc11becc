"""
Open-loop test bench: every device is cycled ON/OFF with a fixed dwell and its
flow sensor recorded. Whole runs are computed with array operations, so fine
sample periods stay cheap.
"""

import logging
import math
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.signal import lfilter

from tcfinger.errors import ConfigError
from tcfinger.fingerprint import OP_OFF, OP_ON, extract_transitions, sensor_thresholds, transition_times
from tcfinger.plantsim.scenario import CLOSE_TO_OPEN, PUMP, VALVE, DeviceParams, nominal_device
from tcfinger.timeseries import ACTUATOR, SENSOR, ActuatorState, Dataset, TimeSeries

OFF = int(ActuatorState.OFF)
ON = int(ActuatorState.ON)
TRAVEL = int(ActuatorState.TRAVEL)

BENCH_NOISE_STD = 0.002
# per-unit repeatability of the five bench valves, in open-time order
FIVE_VALVE_JITTER_S = (0.02, 0.2, 0.5, 0.2, 0.02)
ENTROPY_JITTER_FRACTION = 0.2


def sensor_name(device: DeviceParams) -> str:
    return device.flow_sensor or f"FIT_{device.device_id}"


def _jitters(rng: np.random.Generator, device: DeviceParams, count: int) -> np.ndarray:
    if device.jitter_std_s == 0:
        return np.zeros(count)
    if device.jitter_law == "uniform":
        half = math.sqrt(3.0) * device.jitter_std_s
        return rng.uniform(-half, half, size=count)
    return rng.normal(0.0, device.jitter_std_s, size=count)


def _min_dwell(device: DeviceParams) -> float:
    travel = max(device.open_time_s, device.close_time_s) + 4 * device.jitter_std_s
    return travel + 5 * device.process_tau_s


def _device_trace(device: DeviceParams, operations: int, dwell: int, n: int, dt: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = np.arange(n)
    op = (t - dwell) // dwell
    idle = op < 0
    op = np.clip(op, 0, operations - 1)
    elapsed = t - dwell - op * dwell
    opening = (op % 2) == 0

    base = np.where(np.arange(operations) % 2 == 0, device.open_time_s, device.close_time_s)
    durations = np.maximum(base + _jitters(rng, device, operations), dt)
    frac = np.clip(elapsed * dt / durations[op], 0.0, 1.0)
    pos = np.where(opening, frac, 1.0 - frac)
    pos[idle] = 0.0
    cmd = opening & ~idle

    if device.kind == PUMP:
        status = np.where(cmd, ON, OFF)
    else:
        status = np.full(n, TRAVEL)
        status[cmd & (pos >= 1.0)] = ON
        status[~cmd & (pos <= 0.0)] = OFF

    a = math.exp(-dt / device.process_tau_s)
    target = pos * device.max_flow
    flow, _ = lfilter([1.0 - a], [1.0, -a], target, zi=[a * target[0]])
    return status, flow, durations


def bench_run(
    devices: Sequence[DeviceParams],
    operations: int,
    dwell_s: float,
    sample_period_s: float = 1.0,
    seed: int = 0,
) -> Tuple[Dataset, Dict[str, np.ndarray]]:
    """
    Cycle each device `operations` times (ON first), `dwell_s` apart, after an idle lead-in of one dwell.

    Returns:
        Dataset with a status and a flow channel per device, and the drawn travel durations per device
    """
    if operations < 1:
        raise ConfigError("operations must be >= 1")
    if not devices:
        raise ConfigError("bench_run needs at least one device")
    for device in devices:
        if dwell_s < _min_dwell(device):
            raise ConfigError(f"dwell_s={dwell_s} is too short for {device.device_id} (needs {_min_dwell(device):.1f} s)")

    dt = sample_period_s
    dwell = int(round(dwell_s / dt))
    n = dwell * (operations + 1)
    rng = np.random.default_rng(seed)

    channels: List[TimeSeries] = []
    drawn: Dict[str, np.ndarray] = {}
    for device in devices:
        status, flow, durations = _device_trace(device, operations, dwell, n, dt, rng)
        flow = flow + rng.normal(0.0, device.sensor_noise_std, size=n) if device.sensor_noise_std > 0 else flow
        states = (OFF, ON) if device.kind == PUMP else (TRAVEL, OFF, ON)
        channels.append(TimeSeries(name=device.device_id, kind=ACTUATOR, values=status, states=states))
        channels.append(TimeSeries(name=sensor_name(device), kind=SENSOR, values=flow, unit="m3/h"))
        drawn[device.device_id] = durations
    logging.info(f"Bench run: {len(devices)} devices x {operations} operations, {n} samples at {dt} s")
    return Dataset(channels=tuple(channels), sample_period_s=dt, provenance="simulated"), drawn


def bench_transition_times(
    devices: Sequence[DeviceParams],
    operations: int,
    dwell_s: float,
    sample_period_s: float = 1.0,
    seed: int = 0,
    timeout_s: float = 120.0,
) -> Dict[str, Dict[str, np.ndarray]]:
    """Complete transition times per device and operation type from one bench run."""
    ds, _ = bench_run(devices, operations, dwell_s, sample_period_s, seed)
    result: Dict[str, Dict[str, np.ndarray]] = {}
    for device in devices:
        sensor = sensor_name(device)
        events = extract_transitions(ds, device.device_id, sensor, sensor_thresholds(ds, sensor), timeout_s)
        result[device.device_id] = {OP_ON: transition_times(events, OP_ON), OP_OFF: transition_times(events, OP_OFF)}
    return result


def classification_devices() -> List[DeviceParams]:
    """Two valves and two pumps with distinct nominal timing and repeatability."""
    return [
        DeviceParams(device_id="P101", kind=PUMP, open_time_s=3.0, close_time_s=3.45, jitter_std_s=0.6,
                     process_tau_s=2.0, max_flow=2.35, flow_sensor="FIT201"),
        DeviceParams(device_id="P302", kind=PUMP, open_time_s=4.5, close_time_s=5.2, jitter_std_s=0.1,
                     process_tau_s=2.5, max_flow=2.0, flow_sensor="FIT301"),
        DeviceParams(device_id="MV101", kind=VALVE, open_time_s=9.0, close_time_s=10.35, jitter_std_s=0.1,
                     process_tau_s=4.0, max_flow=2.4, flow_sensor="FIT101"),
        DeviceParams(device_id="MV201", kind=VALVE, open_time_s=12.0, close_time_s=13.8, jitter_std_s=0.6,
                     process_tau_s=4.0, max_flow=2.4, flow_sensor="FIT202"),
    ]


def five_valve_devices(
    spread: float = 0.08,
    nominal_s: float = 10.0,
    jitter_std_s: Union[float, Sequence[float]] = FIVE_VALVE_JITTER_S,
) -> List[DeviceParams]:
    """
    Five valves of one type on a bench loop.

    Nominal open times span +-spread evenly; each unit keeps its own repeatability
    (jitter_std_s per valve, or one value for all) and flow sensors are bench grade.
    """
    jitters = np.broadcast_to(np.asarray(jitter_std_s, dtype=float), (5,))
    factors = 1.0 + spread * np.linspace(-1.0, 1.0, 5)
    return [
        DeviceParams(device_id=f"MV{i + 1}", kind=VALVE, open_time_s=float(nominal_s * f), close_time_s=float(CLOSE_TO_OPEN * nominal_s * f),
                     jitter_std_s=float(jitter), process_tau_s=4.0, max_flow=2.4, flow_sensor=f"FIT{i + 1}", sensor_noise_std=BENCH_NOISE_STD)
        for i, (f, jitter) in enumerate(zip(factors, jitters))
    ]


def entropy_devices(count: int = 8, seed: int = 0, spread: float = 0.25) -> List[DeviceParams]:
    """
    Distinct processes, valves and pumps alternating, with nominal timing drawn per device.

    Jitter is uniform and wide against the sample period, so Time Constants spread
    evenly over their range.
    """
    rng = np.random.default_rng(seed)
    devices = []
    for i in range(count):
        kind = VALVE if i % 2 == 0 else PUMP
        device = nominal_device(kind, f"A{i + 1}", spread=spread, seed=seed, jitter_law="uniform",
                                process_tau_s=float(rng.uniform(1.5, 3.0)), max_flow=2.0, flow_sensor=f"F{i + 1}",
                                sensor_noise_std=BENCH_NOISE_STD)
        devices.append(DeviceParams.model_validate({**device.model_dump(), "jitter_std_s": ENTROPY_JITTER_FRACTION * device.open_time_s}))
    return devices
