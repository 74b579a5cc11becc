import numpy as np
import pytest

from tcfinger.errors import EmptyDataset, IoError, MissingValue, RaggedSampling, SchemaError, UnknownChannel
from tcfinger.timeseries import ACTUATOR, SENSOR, ChannelSpec, Dataset, TimeSeries, export_csv, ingest_csv, make_dataset, window

SCHEMA = {"MV101": ACTUATOR, "FIT101": SENSOR}


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_ingest_reads_uniform_csv(tmp_path):
    path = _write(tmp_path / "d.csv", "time,MV101,FIT101\n0,1,0.0\n1,0,0.5\n2,2,2.4\n")
    ds = ingest_csv(path, SCHEMA)
    assert len(ds) == 3
    assert ds.sample_period_s == 1.0
    assert ds.names == ["MV101", "FIT101"]
    assert ds.values("MV101").tolist() == [1.0, 0.0, 2.0]
    assert ds.channel("FIT101").kind == SENSOR


def test_ingest_single_row_uses_default_period(tmp_path):
    path = _write(tmp_path / "d.csv", "time,FIT101\n5,1.5\n")
    ds = ingest_csv(path, SCHEMA, default_period_s=0.5)
    assert len(ds) == 1
    assert ds.sample_period_s == 0.5
    assert ds.start_time == 5.0


def test_ingest_rejects_non_uniform_time(tmp_path):
    path = _write(tmp_path / "d.csv", "time,FIT101\n0,1\n1,1\n3,1\n")
    with pytest.raises(RaggedSampling):
        ingest_csv(path, SCHEMA)


def test_ingest_rejects_blank_cell(tmp_path):
    path = _write(tmp_path / "d.csv", "time,MV101,FIT101\n0,1,0.0\n1,,0.5\n")
    with pytest.raises(MissingValue):
        ingest_csv(path, SCHEMA)


def test_ingest_rejects_undeclared_column(tmp_path):
    path = _write(tmp_path / "d.csv", "time,LIT101\n0,500\n1,501\n")
    with pytest.raises(UnknownChannel):
        ingest_csv(path, SCHEMA)


def test_ingest_rejects_actuator_code_outside_alphabet(tmp_path):
    path = _write(tmp_path / "d.csv", "time,MV101\n0,1\n1,3\n")
    with pytest.raises(SchemaError):
        ingest_csv(path, SCHEMA)


def test_pump_alphabet_rejects_travel_code(tmp_path):
    path = _write(tmp_path / "d.csv", "time,P101\n0,1\n1,0\n")
    with pytest.raises(SchemaError):
        ingest_csv(path, {"P101": ChannelSpec(kind=ACTUATOR, states=(1, 2))})


def test_ingest_header_only_is_empty(tmp_path):
    path = _write(tmp_path / "d.csv", "time,FIT101\n")
    with pytest.raises(EmptyDataset):
        ingest_csv(path, SCHEMA)


def test_ingest_missing_file(tmp_path):
    with pytest.raises(IoError):
        ingest_csv(str(tmp_path / "nope.csv"), SCHEMA)


def test_export_then_ingest_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    ds = make_dataset(
        [("MV101", ACTUATOR, rng.integers(0, 3, 50)), ("FIT101", SENSOR, rng.normal(1.0, 0.3, 50))],
        sample_period_s=0.1,
        start_time=12.5,
    )
    path = str(tmp_path / "d.csv")
    export_csv(ds, path)
    assert ingest_csv(path, SCHEMA) == ds


def test_ragged_channels_are_rejected():
    with pytest.raises(RaggedSampling):
        Dataset(channels=(TimeSeries("a", SENSOR, np.zeros(3)), TimeSeries("b", SENSOR, np.zeros(4))))


def test_window_slices_and_shifts_start_time():
    ds = make_dataset([("FIT101", SENSOR, np.arange(10.0))], sample_period_s=2.0)
    part = window(ds, 3, 7)
    assert part.values("FIT101").tolist() == [3.0, 4.0, 5.0, 6.0]
    assert part.start_time == 6.0


@pytest.mark.parametrize("bounds", [(5, 5), (-1, 3), (0, 11)])
def test_window_rejects_bad_bounds(bounds):
    ds = make_dataset([("FIT101", SENSOR, np.arange(10.0))])
    with pytest.raises(IndexError):
        window(ds, *bounds)


def test_unknown_channel_lookup():
    ds = make_dataset([("FIT101", SENSOR, np.arange(3.0))])
    with pytest.raises(UnknownChannel):
        ds.values("LIT101")
