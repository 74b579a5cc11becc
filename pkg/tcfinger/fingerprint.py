"""
Time-Constant extraction and the 8-feature fingerprint of a chunk of transition times.

A transition starts when an actuator leaves its OFF (ON) code and ends when the
paired sensor first crosses the ON (OFF) threshold derived from the sensor's
observed extrema.
"""

import csv
import logging
from dataclasses import astuple, dataclass, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np

from tcfinger.errors import BadInput, DegenerateRange, EmptySeries, IoError, ZeroVariance
from tcfinger.timeseries import ActuatorState, Dataset

OP_ON = "ON"
OP_OFF = "OFF"

COMPLETE = "complete"
INCOMPLETE = "incomplete"
TIMED_OUT = "timed_out"

DEFAULT_TIMEOUT_S = 120.0
DEFAULT_CHUNK_SIZE = 10

_OFF = int(ActuatorState.OFF)
_ON = int(ActuatorState.ON)


@dataclass(frozen=True)
class SensorThresholds:
    t_on: float
    t_off: float
    s_max: float
    s_min: float


@dataclass(frozen=True)
class TransitionEvent:
    """
    One actuator operation and its measured transition.

    Attributes:
        actuator: Actuator channel
        op: "ON" or "OFF"
        start_idx: Sample where the actuator left its previous state
        end_idx: Sample of the threshold crossing (complete events only)
        transition_time_s: (end_idx - start_idx) * period (complete events only)
        status: complete | incomplete | timed_out
    """
    actuator: str
    op: str
    start_idx: int
    status: str
    end_idx: Optional[int] = None
    transition_time_s: Optional[float] = None


@dataclass(frozen=True)
class FeatureVector:
    mean: float
    std_dev: float
    mean_avg_dev: float
    skewness: float
    kurtosis: float
    spec_std_dev: float
    spec_centroid: float
    dc_component: float
    degenerate: bool = False

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self)[:len(FEATURE_NAMES)], dtype=float)


FEATURE_NAMES: Tuple[str, ...] = tuple(f.name for f in fields(FeatureVector) if f.name != "degenerate")


def thresholds_from_extrema(s_max: float, s_min: float) -> SensorThresholds:
    if not s_max > s_min:
        raise DegenerateRange(f"Sensor range is empty (max={s_max}, min={s_min})")
    return SensorThresholds(
        t_on=0.9 * s_max + 0.1 * s_min,
        t_off=0.1 * s_max + 0.9 * s_min,
        s_max=s_max,
        s_min=s_min,
    )


def sensor_thresholds(ds: Dataset, sensor: str) -> SensorThresholds:
    """ON/OFF crossing thresholds at 90% / 10% of the sensor's observed range."""
    values = ds.values(sensor)
    if values.size == 0:
        raise EmptySeries(f"Sensor {sensor} has no samples")
    return thresholds_from_extrema(float(values.max()), float(values.min()))


def operation_starts(codes: np.ndarray) -> List[Tuple[int, str]]:
    """Indices where the code leaves OFF (an ON operation) or leaves ON (an OFF operation)."""
    codes = np.asarray(codes)
    if codes.size < 2:
        return []
    prev, cur = codes[:-1], codes[1:]
    on = np.flatnonzero((prev == _OFF) & (cur != _OFF)) + 1
    off = np.flatnonzero((prev == _ON) & (cur != _ON)) + 1
    starts = [(int(i), OP_ON) for i in on] + [(int(i), OP_OFF) for i in off]
    starts.sort()
    return starts


def extract_transitions(
    ds: Dataset,
    actuator: str,
    sensor: str,
    thresholds: SensorThresholds,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> List[TransitionEvent]:
    """
    Measure every operation of an actuator on its paired sensor.

    An operation is incomplete when the next operation starts, or the actuator
    returns to its origin code, before the crossing; timed out when timeout_s
    passes first. Operations unresolved at the end of the data are dropped.
    """
    if timeout_s <= 0:
        raise BadInput(f"timeout_s must be positive, got {timeout_s}")
    codes = ds.values(actuator).astype(int)
    y = ds.values(sensor)
    n = len(codes)
    period = ds.sample_period_s
    timeout = int(round(timeout_s / period))

    starts = operation_starts(codes)
    events = []
    for k, (s, op) in enumerate(starts):
        origin = _OFF if op == OP_ON else _ON
        next_start = starts[k + 1][0] if k + 1 < len(starts) else n
        back = np.flatnonzero(codes[s + 1:next_start] == origin)
        interrupt = s + 1 + int(back[0]) if back.size else next_start
        limit = min(interrupt - 1, s + timeout, n - 1)

        segment = y[s:limit + 1]
        hit = segment >= thresholds.t_on if op == OP_ON else segment <= thresholds.t_off
        if hit.any():
            end = s + int(np.argmax(hit))
            events.append(TransitionEvent(actuator, op, s, COMPLETE, end_idx=end, transition_time_s=(end - s) * period))
        elif interrupt < n and interrupt <= s + timeout:
            events.append(TransitionEvent(actuator, op, s, INCOMPLETE))
        elif s + timeout <= n - 1:
            events.append(TransitionEvent(actuator, op, s, TIMED_OUT))
    logging.debug(f"{actuator}/{sensor}: {len(events)} operations from {len(starts)} state changes")
    return events


def response_times(
    ds: Dataset,
    sensor: str,
    thresholds: SensorThresholds,
    commands: Sequence[Tuple[int, str]],
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> np.ndarray:
    """
    Seconds from each (command index, op) to the sensor's crossing, as the PLC sees them.

    Unlike Time Constants these include any delay between the command and the
    actuator moving. A command without a crossing within timeout_s reports timeout_s.
    """
    if timeout_s <= 0:
        raise BadInput(f"timeout_s must be positive, got {timeout_s}")
    y = ds.values(sensor)
    period = ds.sample_period_s
    timeout = int(round(timeout_s / period))
    out = np.full(len(commands), float(timeout_s))
    for k, (idx, op) in enumerate(commands):
        if not 0 <= idx < y.size:
            raise BadInput(f"Command index {idx} is outside the data")
        segment = y[idx:min(idx + timeout + 1, y.size)]
        hit = segment >= thresholds.t_on if op == OP_ON else segment <= thresholds.t_off
        if hit.any():
            out[k] = int(np.argmax(hit)) * period
    return out


def transition_times(events: Sequence[TransitionEvent], op: Optional[str] = None) -> np.ndarray:
    """Transition times (s) of the complete events, optionally of one operation type."""
    return np.array(
        [e.transition_time_s for e in events if e.status == COMPLETE and (op is None or e.op == op)],
        dtype=float,
    )


def fft_magnitude(x: Sequence[float], sample_rate: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Magnitude spectrum of x zero-padded to the next power of two.

    Returns:
        (y_f, y_m): bin frequencies and magnitudes of bins 0..N/2
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise EmptySeries("fft_magnitude needs at least one sample")
    size = 1 << (x.size - 1).bit_length()
    spectrum = np.fft.rfft(x, n=size)
    y_f = np.arange(size // 2 + 1) * sample_rate / size
    return y_f, np.abs(spectrum)


def features(chunk: Sequence[float], chunk_size: Optional[int] = None) -> FeatureVector:
    """
    Fingerprint of one chunk of transition times.

    std_dev is the sample (N-1) deviation; skewness and excess kurtosis use
    1/N moments divided by that std_dev. Spectral features come from
    fft_magnitude of the chunk itself.

    Raises:
        ZeroVariance: std_dev is 0; `partial` holds the vector with
            skewness = kurtosis = 0 and degenerate set
    """
    x = np.asarray(chunk, dtype=float)
    if x.size == 0:
        raise EmptySeries("Empty chunk")
    if chunk_size is not None and x.size != chunk_size:
        raise BadInput(f"Chunk has {x.size} values, expected {chunk_size}")
    if x.size < 2:
        raise BadInput("A chunk needs at least two transition times")
    if not np.all(np.isfinite(x)):
        raise BadInput("Chunk contains non-finite values")

    mean = float(x.mean())
    dev = x - mean
    std = float(x.std(ddof=1))
    mad = float(np.mean(np.abs(dev)))

    y_f, y_m = fft_magnitude(x)
    total = float(y_m.sum())
    centroid = float(np.sum(y_f * y_m) / total) if total > 0 else 0.0
    spread = float(np.sqrt(np.sum(y_f ** 2 * y_m) / total)) if total > 0 else 0.0
    dc = float(y_m[0])

    if std == 0.0:
        partial = FeatureVector(mean, 0.0, mad, 0.0, 0.0, spread, centroid, dc, degenerate=True)
        raise ZeroVariance("Chunk has zero standard deviation", partial=partial)

    skewness = float(np.mean(dev ** 3) / std ** 3)
    kurtosis = float(np.mean(dev ** 4) / std ** 4 - 3.0)
    return FeatureVector(mean, std, mad, skewness, kurtosis, spread, centroid, dc)


def chunk_features(times: Sequence[float], chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[FeatureVector]:
    """Features of consecutive non-overlapping chunks; a trailing partial chunk is dropped."""
    values = np.asarray(times, dtype=float)
    vectors = []
    for start in range(0, values.size - chunk_size + 1, chunk_size):
        try:
            vectors.append(features(values[start:start + chunk_size], chunk_size))
        except ZeroVariance as e:
            vectors.append(e.partial)
    return vectors


def fingerprint_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, len(FEATURE_NAMES)))
    return np.vstack([v.as_array() for v in vectors])


def export_fingerprints(path: str, rows: Sequence[Tuple[FeatureVector, str]]) -> None:
    """Write one CSV row per chunk: the 8 features, the degenerate flag and the label."""
    header = list(FEATURE_NAMES) + ["degenerate", "label"]
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=header, lineterminator="\n")
            writer.writeheader()
            for vector, label in rows:
                row = {name: format(value, ".17g") for name, value in zip(FEATURE_NAMES, vector.as_array())}
                row["degenerate"] = int(vector.degenerate)
                row["label"] = label
                writer.writerow(row)
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def load_fingerprints(path: str) -> Tuple[np.ndarray, List[str]]:
    """Feature matrix and labels from a file written by export_fingerprints."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.DictReader(f))
    except FileNotFoundError as e:
        raise IoError(f"File {path} not found") from e
    if not rows:
        raise EmptySeries(f"{path} holds no fingerprints")
    missing = [name for name in FEATURE_NAMES + ("label",) if name not in rows[0]]
    if missing:
        raise BadInput(f"{path} is missing columns {missing}")
    X = np.array([[float(r[name]) for name in FEATURE_NAMES] for r in rows])
    return X, [r["label"] for r in rows]
