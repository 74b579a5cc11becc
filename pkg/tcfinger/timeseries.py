"""
Uniformly sampled plant traces and their historian-style CSV form.

A Dataset stores every channel as a float array of identical length; time is
implicit (start_time + index * sample_period_s).
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from tcfinger.errors import (
    EmptyDataset,
    IoError,
    MissingValue,
    RaggedSampling,
    SchemaError,
    UnknownChannel,
)

SENSOR = "sensor"
ACTUATOR = "actuator"


class ActuatorState(IntEnum):
    """Reported actuator status codes (historian convention)."""
    TRAVEL = 0
    OFF = 1
    ON = 2


DEFAULT_STATES: Tuple[int, ...] = (ActuatorState.TRAVEL, ActuatorState.OFF, ActuatorState.ON)


@dataclass(frozen=True)
class ChannelSpec:
    """Kind, unit and state alphabet of one channel."""
    kind: str
    unit: str = ""
    states: Tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """
    One channel of a Dataset.

    Attributes:
        name: Channel identifier (MV101, FIT101, ...)
        kind: "sensor" or "actuator"
        unit: Free-text unit
        values: Samples as a float array
        states: Allowed codes for actuator channels
    """
    name: str
    kind: str
    values: np.ndarray
    unit: str = ""
    states: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in (SENSOR, ACTUATOR):
            raise SchemaError(f"Channel {self.name}: unknown kind '{self.kind}'")
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.kind == ACTUATOR:
            states = tuple(int(s) for s in (self.states or DEFAULT_STATES))
            object.__setattr__(self, "states", states)
            if values.size and not np.all(np.isin(values, states)):
                bad = sorted(set(values[~np.isin(values, states)].tolist()))
                raise SchemaError(f"Actuator {self.name} has codes {bad} outside alphabet {states}")

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def spec(self) -> ChannelSpec:
        return ChannelSpec(kind=self.kind, unit=self.unit, states=self.states)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Uniformly sampled set of equal-length channels.

    Attributes:
        channels: Ordered channels
        sample_period_s: Seconds between samples
        start_time: Time of the first sample (seconds)
        provenance: simulated | replayed | attacked
    """
    channels: Tuple[TimeSeries, ...]
    sample_period_s: float = 1.0
    start_time: float = 0.0
    provenance: str = "simulated"
    _index: Dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        channels = tuple(self.channels)
        object.__setattr__(self, "channels", channels)
        if not self.sample_period_s > 0:
            raise RaggedSampling(f"sample_period_s must be positive, got {self.sample_period_s}")
        lengths = {len(ch) for ch in channels}
        if len(lengths) > 1:
            raise RaggedSampling(f"Channels have different lengths: {sorted(lengths)}")
        index = {}
        for i, ch in enumerate(channels):
            if ch.name in index:
                raise SchemaError(f"Duplicate channel name {ch.name}")
            index[ch.name] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.channels[0]) if self.channels else 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.names != other.names or len(self) != len(other):
            return False
        if not math.isclose(self.sample_period_s, other.sample_period_s, rel_tol=1e-12):
            return False
        if not math.isclose(self.start_time, other.start_time, rel_tol=1e-12, abs_tol=1e-9):
            return False
        for a, b in zip(self.channels, other.channels):
            if a.kind != b.kind or not np.array_equal(a.values, b.values):
                return False
        return True

    __hash__ = None  # type: ignore[assignment]

    @property
    def names(self) -> List[str]:
        return [ch.name for ch in self.channels]

    def channel(self, name: str) -> TimeSeries:
        if name not in self._index:
            raise UnknownChannel(f"Channel '{name}' not in dataset ({', '.join(self.names)})")
        return self.channels[self._index[name]]

    def values(self, name: str) -> np.ndarray:
        return self.channel(name).values

    def has(self, name: str) -> bool:
        return name in self._index

    def schema(self) -> Dict[str, ChannelSpec]:
        return {ch.name: ch.spec for ch in self.channels}

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) * self.sample_period_s

    def with_values(self, updates: Mapping[str, np.ndarray], provenance: Optional[str] = None) -> "Dataset":
        """Copy of the dataset with some channels' values replaced."""
        channels = []
        for ch in self.channels:
            if ch.name in updates:
                channels.append(replace(ch, values=np.asarray(updates[ch.name], dtype=float)))
            else:
                channels.append(ch)
        unknown = set(updates) - set(self._index)
        if unknown:
            raise UnknownChannel(f"Unknown channels {sorted(unknown)}")
        return Dataset(
            channels=tuple(channels),
            sample_period_s=self.sample_period_s,
            start_time=self.start_time,
            provenance=provenance or self.provenance,
        )


SchemaLike = Mapping[str, Union[str, ChannelSpec]]


def _as_spec(entry: Union[str, ChannelSpec]) -> ChannelSpec:
    if isinstance(entry, ChannelSpec):
        return entry
    return ChannelSpec(kind=entry)


def ingest_csv(path: str, schema: SchemaLike, provenance: str = "simulated", default_period_s: float = 1.0) -> Dataset:
    """
    Read a historian-style CSV dump.

    Args:
        path: CSV file with header `time,<channel>,...`
        schema: Channel name -> kind ("sensor"/"actuator") or ChannelSpec
        provenance: Tag stored on the returned Dataset
        default_period_s: Period used when the file holds a single row

    Returns:
        Dataset with one channel per non-time column
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except FileNotFoundError as e:
        raise IoError(f"File {path} not found") from e
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}") from e

    if not rows or not rows[0]:
        raise EmptyDataset(f"{path} is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise EmptyDataset(f"{path} has a header but no samples")
    if header[0].strip().lower() != "time":
        raise SchemaError(f"First column of {path} must be 'time', got '{header[0]}'")

    names = [h.strip() for h in header[1:]]
    for name in names:
        if name not in schema:
            raise UnknownChannel(f"Column '{name}' is not declared in the schema")

    table = np.empty((len(body), len(header)), dtype=float)
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise MissingValue(f"Row {i + 2} has {len(row)} cells, expected {len(header)}")
        for j, cell in enumerate(row):
            if cell.strip() == "":
                raise MissingValue(f"Blank cell at row {i + 2}, column '{header[j]}'")
            table[i, j] = float(cell)

    time = table[:, 0]
    period = float(time[1] - time[0]) if len(time) > 1 else default_period_s
    if period <= 0:
        raise RaggedSampling(f"Timestamps in {path} are not strictly increasing")
    expected = time[0] + np.arange(len(time)) * period
    tolerance = 1e-9 * max(1.0, float(np.max(np.abs(time))))
    if np.any(np.abs(time - expected) > tolerance):
        bad = int(np.argmax(np.abs(time - expected) > tolerance))
        raise RaggedSampling(f"Non-uniform timestamp at row {bad + 2} of {path}")

    channels = []
    for j, name in enumerate(names, start=1):
        spec = _as_spec(schema[name])
        channels.append(TimeSeries(name=name, kind=spec.kind, values=table[:, j], unit=spec.unit, states=spec.states))

    logging.debug(f"Ingested {path}: {len(names)} channels, {len(time)} samples, period {period}")
    return Dataset(channels=tuple(channels), sample_period_s=period, start_time=float(time[0]), provenance=provenance)


def _format_value(value: float, kind: str) -> str:
    if kind == ACTUATOR:
        return str(int(value))
    return format(float(value), ".17g")


def export_csv(ds: Dataset, path: str) -> None:
    """Write ds as `time,<channels...>`; values survive re-ingestion bit-for-bit."""
    if not ds.channels or len(ds) == 0:
        raise EmptyDataset("Cannot export an empty dataset")
    times = ds.times()
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["time"] + ds.names)
            columns = [(ch.values, ch.kind) for ch in ds.channels]
            for i in range(len(ds)):
                writer.writerow([format(float(times[i]), ".17g")] + [_format_value(v[i], k) for v, k in columns])
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def window(ds: Dataset, start_idx: int, end_idx: int) -> Dataset:
    """Slice every channel to [start_idx, end_idx)."""
    n = len(ds)
    if not (0 <= start_idx < end_idx <= n):
        raise IndexError(f"window [{start_idx}, {end_idx}) outside dataset of length {n}")
    channels = tuple(replace(ch, values=ch.values[start_idx:end_idx].copy()) for ch in ds.channels)
    return Dataset(
        channels=channels,
        sample_period_s=ds.sample_period_s,
        start_time=ds.start_time + start_idx * ds.sample_period_s,
        provenance=ds.provenance,
    )


def make_dataset(
    columns: Iterable[Tuple[str, str, Sequence[float]]],
    sample_period_s: float = 1.0,
    start_time: float = 0.0,
    provenance: str = "simulated",
    units: Optional[Mapping[str, str]] = None,
) -> Dataset:
    """Convenience builder from (name, kind, values) triples."""
    units = units or {}
    channels = tuple(TimeSeries(name=n, kind=k, values=np.asarray(v, dtype=float), unit=units.get(n, "")) for n, k, v in columns)
    return Dataset(channels=channels, sample_period_s=sample_period_s, start_time=start_time, provenance=provenance)
