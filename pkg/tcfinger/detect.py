"""
Two-sided CUSUM over actuator transition times.

Each (actuator, operation) pair gets its own detector: a mean and bias fitted
on attack-free transitions, and thresholds tuned to a maximum false alarm rate.
Incomplete and timed-out operations raise alarms of their own category.
"""

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from tcfinger.errors import BadInput, ConfigError, InsufficientData, IoError
from tcfinger.fingerprint import (
    COMPLETE,
    DEFAULT_TIMEOUT_S,
    INCOMPLETE,
    OP_OFF,
    OP_ON,
    TIMED_OUT,
    SensorThresholds,
    TransitionEvent,
    extract_transitions,
    sensor_thresholds,
)
from tcfinger.timeseries import Dataset

POSITIVE = "positive"
NEGATIVE = "negative"

CUSUM = "cusum"
CATEGORIES = (CUSUM, INCOMPLETE, TIMED_OUT)

DEFAULT_MAX_FAR = 0.02
MIN_FIT_SAMPLES = 5
MIN_TUNE_SAMPLES = 20
SEARCH_ITERATIONS = 40
THRESHOLD_FLOOR = 1e-9

Pair = Tuple[str, str]


@dataclass(frozen=True)
class CusumParams:
    """
    Attributes:
        mu: Mean transition time (s)
        beta: Bias (s), half the sample standard deviation when fitted
        t_plus / t_minus: Alarm thresholds, t_plus > 0 > t_minus
    """
    mu: float
    beta: float
    t_plus: float
    t_minus: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.mu, self.beta, self.t_plus, self.t_minus)):
            raise ConfigError("CUSUM parameters must be finite")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if not self.t_plus > 0 > self.t_minus:
            raise ConfigError(f"Thresholds must satisfy t_plus > 0 > t_minus, got {self.t_plus}, {self.t_minus}")


@dataclass(frozen=True)
class CusumState:
    """
    Attributes:
        s_plus / s_minus: Cumulative sums, s_plus >= 0 >= s_minus
        i: Number of steps taken
        plus_start / minus_start: Latest iteration where each sum was clipped to 0
    """
    s_plus: float = 0.0
    s_minus: float = 0.0
    i: int = 0
    plus_start: int = 0
    minus_start: int = 0


def cusum_step(state: CusumState, params: CusumParams, t_i: float) -> Tuple[CusumState, FrozenSet[str]]:
    """
    Update both directions with one transition time.

    A direction alarms when its statistic leaves [t_minus, t_plus]; the
    statistic is then reset to 0.
    """
    if not math.isfinite(t_i):
        raise BadInput(f"Transition time must be finite, got {t_i}")
    if t_i < 0:
        raise BadInput(f"Transition time must be >= 0, got {t_i}")
    d_plus = state.s_plus + t_i - params.mu - params.beta
    d_minus = state.s_minus + t_i - params.mu + params.beta
    alarms = set()

    if d_plus > params.t_plus:
        alarms.add(POSITIVE)
        s_plus = 0.0
    else:
        s_plus = max(0.0, d_plus)
    if d_minus < params.t_minus:
        alarms.add(NEGATIVE)
        s_minus = 0.0
    else:
        s_minus = min(0.0, d_minus)

    it = state.i
    new_state = replace(
        state,
        s_plus=s_plus,
        s_minus=s_minus,
        i=it + 1,
        plus_start=it if s_plus == 0.0 else state.plus_start,
        minus_start=it if s_minus == 0.0 else state.minus_start,
    )
    return new_state, frozenset(alarms)


def _times(transitions: Sequence[Union[TransitionEvent, float]]) -> np.ndarray:
    values = [
        t.transition_time_s if isinstance(t, TransitionEvent) else t
        for t in transitions
        if not isinstance(t, TransitionEvent) or t.status == COMPLETE
    ]
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise BadInput("Transition times contain NaN or infinite values")
    return arr


def fit_cusum_params(transitions: Sequence[Union[TransitionEvent, float]]) -> Tuple[float, float]:
    """mu = sample mean, beta = half the sample standard deviation of the complete transitions."""
    times = _times(transitions)
    if times.size < MIN_FIT_SAMPLES:
        raise InsufficientData(f"Need at least {MIN_FIT_SAMPLES} complete transitions, got {times.size}")
    return float(times.mean()), float(times.std(ddof=1) / 2.0)


def _alarm_rate(times: np.ndarray, mu: float, beta: float, threshold: float, direction: str) -> float:
    s = 0.0
    alarms = 0
    for t in times:
        if direction == POSITIVE:
            d = s + t - mu - beta
            if d > threshold:
                alarms += 1
                s = 0.0
            else:
                s = max(0.0, d)
        else:
            d = s + t - mu + beta
            if d < -threshold:
                alarms += 1
                s = 0.0
            else:
                s = min(0.0, d)
    return alarms / times.size


def _max_excursion(times: np.ndarray, mu: float, beta: float, direction: str) -> float:
    """Largest |d| of the sum without any reset; no threshold at or above it can alarm."""
    s = 0.0
    peak = 0.0
    for t in times:
        if direction == POSITIVE:
            d = s + t - mu - beta
            s = max(0.0, d)
            peak = max(peak, d)
        else:
            d = s + t - mu + beta
            s = min(0.0, d)
            peak = max(peak, -d)
    return peak


def _search(times: np.ndarray, mu: float, beta: float, direction: str, max_far: float) -> float:
    lo, hi = 0.0, _max_excursion(times, mu, beta, direction)
    if hi <= THRESHOLD_FLOOR:
        return THRESHOLD_FLOOR
    for _ in range(SEARCH_ITERATIONS):
        mid = 0.5 * (lo + hi)
        if _alarm_rate(times, mu, beta, mid, direction) <= max_far:
            hi = mid
        else:
            lo = mid
    return max(hi, THRESHOLD_FLOOR)


def tune_thresholds(
    transitions: Sequence[Union[TransitionEvent, float]],
    max_far: float = DEFAULT_MAX_FAR,
    mu: Optional[float] = None,
    beta: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Smallest thresholds keeping the alarm rate of the training transitions at or below max_far.

    Each direction is searched independently by bisection over
    [0, largest unreset excursion]. mu and beta default to the fitted values.

    Returns:
        (t_plus, t_minus)
    """
    if not 0.0 <= max_far < 1.0:
        raise ConfigError(f"max_far must be in [0, 1), got {max_far}")
    times = _times(transitions)
    if times.size < MIN_TUNE_SAMPLES:
        raise InsufficientData(f"Need at least {MIN_TUNE_SAMPLES} transitions to tune thresholds, got {times.size}")
    if mu is None or beta is None:
        fit_mu, fit_beta = fit_cusum_params(times)
        mu = fit_mu if mu is None else mu
        beta = fit_beta if beta is None else beta
    t_plus = _search(times, mu, beta, POSITIVE, max_far)
    t_minus = -_search(times, mu, beta, NEGATIVE, max_far)
    return t_plus, t_minus


def fit_params(transitions: Sequence[Union[TransitionEvent, float]], max_far: float = DEFAULT_MAX_FAR) -> CusumParams:
    mu, beta = fit_cusum_params(transitions)
    t_plus, t_minus = tune_thresholds(transitions, max_far, mu=mu, beta=beta)
    return CusumParams(mu=mu, beta=beta, t_plus=t_plus, t_minus=t_minus)


@dataclass
class DetectorParams:
    """
    Everything run_detector needs for one plant.

    Attributes:
        pairings: actuator -> sensor
        cusum: (actuator, op) -> CusumParams
        thresholds: sensor -> crossing thresholds fitted on the training data
        timeout_s: Transition timeout used during training
    """
    pairings: Dict[str, str]
    cusum: Dict[Pair, CusumParams]
    thresholds: Dict[str, SensorThresholds]
    timeout_s: float = DEFAULT_TIMEOUT_S


def fit_detector(
    ds: Dataset,
    pairings: Mapping[str, str],
    timeout_s: float = DEFAULT_TIMEOUT_S,
    max_far: float = DEFAULT_MAX_FAR,
) -> DetectorParams:
    """Fit CUSUM parameters for every (actuator, op) of the given pairings on attack-free data."""
    cusum: Dict[Pair, CusumParams] = {}
    thresholds: Dict[str, SensorThresholds] = {}
    kept: Dict[str, str] = {}
    for actuator, sensor in pairings.items():
        th = sensor_thresholds(ds, sensor)
        events = extract_transitions(ds, actuator, sensor, th, timeout_s)
        try:
            fitted = {op: fit_params([e for e in events if e.op == op], max_far) for op in (OP_ON, OP_OFF)}
        except InsufficientData as e:
            logging.warning(f"Skipping {actuator}/{sensor}: {e}")
            continue
        for op, p in fitted.items():
            cusum[(actuator, op)] = p
            logging.info(f"{actuator} {op}: mu={p.mu:.2f}s beta={p.beta:.2f}s T+={p.t_plus:.2f} T-={p.t_minus:.2f}")
        thresholds[sensor] = th
        kept[actuator] = sensor
    if not cusum:
        raise InsufficientData("No actuator had enough transitions to fit a detector")
    return DetectorParams(pairings=kept, cusum=cusum, thresholds=thresholds, timeout_s=timeout_s)


@dataclass(frozen=True)
class Alarm:
    """
    Attributes:
        category: cusum | incomplete | timed_out
        direction: positive | negative for CUSUM alarms, None otherwise
        iteration: Index of the operation in the pair's stream (complete ones for CUSUM)
        change_start_iteration: Latest prior iteration where the sum was 0
        idx / change_start_idx: The same two points as sample indices
        op_start_idx: Start of the operation that raised the alarm; None means idx
    """
    actuator: str
    op: str
    category: str
    iteration: int
    change_start_iteration: int
    idx: int
    change_start_idx: int
    direction: Optional[str] = None
    op_start_idx: Optional[int] = None

    def window(self) -> Tuple[int, int]:
        """Samples of the operation that raised the alarm."""
        return (self.idx if self.op_start_idx is None else self.op_start_idx), self.idx


@dataclass
class AlarmLog:
    sample_period_s: float
    timeout_s: float
    alarms: List[Alarm] = field(default_factory=list)
    iterations: Dict[Pair, int] = field(default_factory=dict)
    incomplete: Dict[Pair, int] = field(default_factory=dict)
    timed_out: Dict[Pair, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.alarms)

    def by_category(self, category: str) -> List[Alarm]:
        return [a for a in self.alarms if a.category == category]

    def for_pair(self, actuator: str, op: str) -> List[Alarm]:
        return [a for a in self.alarms if a.actuator == actuator and a.op == op]

    def merge(self, other: "AlarmLog") -> None:
        self.alarms.extend(other.alarms)
        self.alarms.sort(key=lambda a: (a.idx, a.actuator, a.op))
        for target, source in ((self.iterations, other.iterations), (self.incomplete, other.incomplete), (self.timed_out, other.timed_out)):
            for key, count in source.items():
                target[key] = target.get(key, 0) + count


def _run_pair(events: List[TransitionEvent], params: CusumParams, log: AlarmLog) -> None:
    state = CusumState()
    complete_idx: List[int] = []
    for k, e in enumerate(events):
        pair = (e.actuator, e.op)
        if e.status == INCOMPLETE:
            log.incomplete[pair] = log.incomplete.get(pair, 0) + 1
            log.alarms.append(Alarm(e.actuator, e.op, INCOMPLETE, k, k, e.start_idx, e.start_idx))
            continue
        if e.status == TIMED_OUT:
            log.timed_out[pair] = log.timed_out.get(pair, 0) + 1
            log.alarms.append(Alarm(e.actuator, e.op, TIMED_OUT, k, k, e.start_idx, e.start_idx))
            continue

        complete_idx.append(e.start_idx)
        previous = state
        state, fired = cusum_step(state, params, float(e.transition_time_s))  # type: ignore[arg-type]
        end_idx = e.end_idx if e.end_idx is not None else e.start_idx
        for direction in sorted(fired):
            start_it = previous.plus_start if direction == POSITIVE else previous.minus_start
            log.alarms.append(Alarm(e.actuator, e.op, CUSUM, previous.i, start_it, end_idx, complete_idx[start_it], direction, e.start_idx))
    if events:
        pair = (events[0].actuator, events[0].op)
        log.iterations[pair] = log.iterations.get(pair, 0) + state.i


def run_detector(
    ds: Dataset,
    params: DetectorParams,
    timeout_s: Optional[float] = None,
) -> AlarmLog:
    """
    Stream every tracked pair's transitions through its CUSUM.

    Raises:
        ConfigError: an actuator of the pairings lacks ON or OFF parameters
    """
    timeout = params.timeout_s if timeout_s is None else timeout_s
    log = AlarmLog(sample_period_s=ds.sample_period_s, timeout_s=timeout)
    for actuator, sensor in params.pairings.items():
        for op in (OP_ON, OP_OFF):
            if (actuator, op) not in params.cusum:
                raise ConfigError(f"No CUSUM parameters for {actuator} {op}")
        th = params.thresholds.get(sensor) or sensor_thresholds(ds, sensor)
        events = extract_transitions(ds, actuator, sensor, th, timeout)
        for op in (OP_ON, OP_OFF):
            pair_log = AlarmLog(sample_period_s=ds.sample_period_s, timeout_s=timeout)
            _run_pair([e for e in events if e.op == op], params.cusum[(actuator, op)], pair_log)
            log.merge(pair_log)
    logging.info(f"Detector raised {len(log)} alarms "
                 f"({len(log.by_category(CUSUM))} cusum, {len(log.by_category(INCOMPLETE))} incomplete, {len(log.by_category(TIMED_OUT))} timed out)")
    return log


@dataclass
class DetectionRow:
    """Rates are percentages of the performed attacks of one type."""
    attack_type: str
    performed: int
    detected: int
    overall: float
    cusum: float
    incomplete: float
    timed_out: float


def _alarm_hits(alarm: Alarm, start: int, stop: int) -> bool:
    first, last = alarm.window()
    return first <= stop and last >= start


def detection_report(log: AlarmLog, truth, grace_s: Optional[float] = None) -> List[DetectionRow]:
    """
    Per-attack-type detection rates.

    An attack is detected by a category when the operation behind one of its
    alarms overlaps [attack start, attack end + grace]; overall counts an attack
    detected by any category. The accumulation span of a CUSUM alarm is not
    matched, so a sum that started climbing long before an attack does not
    credit it. grace defaults to the log's transition timeout.

    Args:
        truth: GroundTruth or its JSON document; only performed attacks are counted
    """
    grace = int(round((log.timeout_s if grace_s is None else grace_s) / log.sample_period_s))
    hits: Dict[str, Dict[str, int]] = defaultdict(lambda: defaultdict(int))
    order: List[str] = []
    for attack in truth.attacks:
        if not attack.performed:
            continue
        if attack.type not in order:
            order.append(attack.type)
        stop = attack.end_idx + grace
        found = {c for c in CATEGORIES if any(a.category == c and _alarm_hits(a, attack.start_idx, stop) for a in log.alarms)}
        row = hits[attack.type]
        row["performed"] += 1
        row["overall"] += int(bool(found))
        for c in found:
            row[c] += 1

    rows = []
    for kind in sorted(order):
        row = hits[kind]
        n = row["performed"]
        rows.append(DetectionRow(
            attack_type=kind,
            performed=n,
            detected=row["overall"],
            overall=100.0 * row["overall"] / n,
            cusum=100.0 * row[CUSUM] / n,
            incomplete=100.0 * row[INCOMPLETE] / n,
            timed_out=100.0 * row[TIMED_OUT] / n,
        ))
    return rows


def far_table(log: AlarmLog) -> Dict[Pair, float]:
    """CUSUM alarms per complete transition for every (actuator, op) of an attack-free run."""
    table = {}
    for pair, iterations in sorted(log.iterations.items()):
        alarms = sum(1 for a in log.for_pair(*pair) if a.category == CUSUM)
        table[pair] = alarms / iterations if iterations else 0.0
    return table


def export_alarms(log: AlarmLog, path: str) -> None:
    columns = ["actuator", "op", "category", "direction", "iteration", "change_start_iteration", "idx", "change_start_idx", "op_start_idx", "time_s"]
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=columns)
            writer.writeheader()
            for a in log.alarms:
                writer.writerow({
                    "actuator": a.actuator, "op": a.op, "category": a.category, "direction": a.direction or "",
                    "iteration": a.iteration, "change_start_iteration": a.change_start_iteration,
                    "idx": a.idx, "change_start_idx": a.change_start_idx, "op_start_idx": a.window()[0], "time_s": a.idx * log.sample_period_s,
                })
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


class _PairDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    actuator: str
    sensor: str
    op: str
    mu: float
    beta: float
    t_plus: float
    t_minus: float


class _ThresholdDocument(BaseModel):
    t_on: float
    t_off: float
    s_max: float
    s_min: float


class DetectorDocument(BaseModel):
    timeout_s: float
    pairs: List[_PairDocument]
    thresholds: Dict[str, _ThresholdDocument]


def save_detector(params: DetectorParams, path: str) -> None:
    doc = DetectorDocument(
        timeout_s=params.timeout_s,
        pairs=[
            _PairDocument(actuator=a, sensor=params.pairings[a], op=op, mu=p.mu, beta=p.beta, t_plus=p.t_plus, t_minus=p.t_minus)
            for (a, op), p in sorted(params.cusum.items())
        ],
        thresholds={s: _ThresholdDocument(t_on=t.t_on, t_off=t.t_off, s_max=t.s_max, s_min=t.s_min) for s, t in params.thresholds.items()},
    )
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(doc.model_dump_json(indent=2))
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def load_detector(path: str) -> DetectorParams:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = DetectorDocument.model_validate(json.load(f))
    except FileNotFoundError as e:
        raise IoError(f"Detector parameter file {path} not found") from e
    except (json.JSONDecodeError, ValueError) as e:
        raise ConfigError(f"Invalid detector parameter file {path}: {e}") from e
    return DetectorParams(
        pairings={p.actuator: p.sensor for p in doc.pairs},
        cusum={(p.actuator, p.op): CusumParams(p.mu, p.beta, p.t_plus, p.t_minus) for p in doc.pairs},
        thresholds={s: SensorThresholds(t.t_on, t.t_off, t.s_max, t.s_min) for s, t in doc.thresholds.items()},
        timeout_s=doc.timeout_s,
    )
