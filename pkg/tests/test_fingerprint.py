import numpy as np
import pytest

from tcfinger.errors import BadInput, DegenerateRange, EmptySeries, ZeroVariance
from tcfinger.fingerprint import (
    COMPLETE,
    INCOMPLETE,
    OP_OFF,
    OP_ON,
    TIMED_OUT,
    chunk_features,
    export_fingerprints,
    extract_transitions,
    features,
    fft_magnitude,
    fingerprint_matrix,
    load_fingerprints,
    response_times,
    sensor_thresholds,
    thresholds_from_extrema,
    transition_times,
)
from tcfinger.timeseries import ACTUATOR, SENSOR, make_dataset


def test_thresholds_from_flow_extrema():
    th = thresholds_from_extrema(2.4, 0.0)
    assert th.t_on == pytest.approx(2.16)
    assert th.t_off == pytest.approx(0.24)


def test_flat_sensor_has_no_thresholds():
    with pytest.raises(DegenerateRange):
        thresholds_from_extrema(1.0, 1.0)


def test_square_wave_transitions(valve_dataset):
    th = sensor_thresholds(valve_dataset, "FIT101")
    events = extract_transitions(valve_dataset, "MV101", "FIT101", th)
    assert all(e.status == COMPLETE for e in events)
    on = transition_times(events, OP_ON)
    off = transition_times(events, OP_OFF)
    assert len(on) == 10 and len(off) == 9
    assert set(on.tolist()) == {8.0}
    assert set(off.tolist()) == {8.0}
    assert events[0].start_idx == 100 and events[0].end_idx == 108


def _step_dataset(codes, flow):
    return make_dataset([("MV101", ACTUATOR, codes), ("FIT101", SENSOR, flow)])


def test_operation_reversed_before_crossing_is_incomplete():
    codes = np.array([1, 1, 2, 2, 1, 1, 1, 1, 1, 1], dtype=float)
    flow = np.array([0, 0, 0.5, 1.0, 0.5, 0, 0, 0, 0, 0], dtype=float)
    th = thresholds_from_extrema(2.4, 0.0)
    events = extract_transitions(_step_dataset(codes, flow), "MV101", "FIT101", th)
    assert events[0].op == OP_ON and events[0].status == INCOMPLETE


def test_operation_past_timeout_is_timed_out():
    codes = np.array([1] + [2] * 20, dtype=float)
    flow = np.linspace(0.0, 1.0, 21)
    th = thresholds_from_extrema(2.4, 0.0)
    events = extract_transitions(_step_dataset(codes, flow), "MV101", "FIT101", th, timeout_s=10.0)
    assert [(e.op, e.status) for e in events] == [(OP_ON, TIMED_OUT)]


def test_unresolved_operation_at_end_is_dropped():
    codes = np.array([1, 1, 2, 2], dtype=float)
    flow = np.array([0.0, 0.0, 0.1, 0.2])
    th = thresholds_from_extrema(2.4, 0.0)
    assert extract_transitions(_step_dataset(codes, flow), "MV101", "FIT101", th) == []


def test_non_positive_timeout(valve_dataset):
    th = sensor_thresholds(valve_dataset, "FIT101")
    with pytest.raises(BadInput):
        extract_transitions(valve_dataset, "MV101", "FIT101", th, timeout_s=0.0)


def test_response_times_count_from_the_command():
    codes = np.array([1] * 8 + [0] * 4 + [2] * 8, dtype=float)
    flow = np.array([0.0] * 12 + [1.0, 2.2, 2.4, 2.4, 2.4, 2.4, 2.4, 2.4])
    th = thresholds_from_extrema(2.4, 0.0)
    ds = _step_dataset(codes, flow)
    # command at 5, actuator moving from 8: the wait before moving is part of the response
    assert response_times(ds, "FIT101", th, [(5, OP_ON), (0, OP_OFF)], timeout_s=10.0).tolist() == [8.0, 0.0]
    assert response_times(ds, "FIT101", th, [(1, OP_ON)], timeout_s=5.0).tolist() == [5.0]
    with pytest.raises(BadInput):
        response_times(ds, "FIT101", th, [(20, OP_ON)])


def test_features_of_small_chunk():
    fv = features([1.0, 2.0, 3.0], chunk_size=3)
    assert fv.mean == pytest.approx(2.0)
    assert fv.std_dev == pytest.approx(1.0)
    assert fv.mean_avg_dev == pytest.approx(2.0 / 3.0)
    assert fv.skewness == pytest.approx(0.0, abs=1e-12)
    assert fv.kurtosis == pytest.approx(2.0 / 3.0 - 3.0)
    # zero-padded to 4 samples: |X| = 6, 2*sqrt(2), 2 at 0, 1/4, 1/2
    mags = np.array([6.0, 2.0 * np.sqrt(2.0), 2.0])
    freqs = np.array([0.0, 0.25, 0.5])
    assert fv.dc_component == pytest.approx(6.0)
    assert fv.spec_centroid == pytest.approx(np.sum(freqs * mags) / mags.sum())
    assert fv.spec_std_dev == pytest.approx(np.sqrt(np.sum(freqs ** 2 * mags) / mags.sum()))
    assert not fv.degenerate


def test_constant_chunk_raises_with_partial_vector():
    with pytest.raises(ZeroVariance) as err:
        features([7.0] * 5)
    partial = err.value.partial
    assert partial.degenerate
    assert partial.mean == 7.0 and partial.skewness == 0.0 and partial.kurtosis == 0.0


def test_chunk_features_drops_partial_chunk_and_keeps_degenerate():
    times = [7.0] * 10 + list(range(10)) + [1.0, 2.0]
    vectors = chunk_features(times, chunk_size=10)
    assert len(vectors) == 2
    assert vectors[0].degenerate and not vectors[1].degenerate
    assert fingerprint_matrix(vectors).shape == (2, 8)


@pytest.mark.parametrize("chunk", [[], [1.0], [1.0, np.nan]])
def test_invalid_chunks(chunk):
    with pytest.raises((EmptySeries, BadInput)):
        features(chunk)


def test_centroid_lies_within_bin_range():
    x = np.random.default_rng(5).exponential(10.0, 37)
    y_f, y_m = fft_magnitude(x)
    assert len(y_f) == 33
    fv = features(x)
    assert y_f.min() <= fv.spec_centroid <= y_f.max()


def test_fingerprint_file(tmp_path):
    vectors = chunk_features(np.arange(30.0) % 7, chunk_size=10)
    path = str(tmp_path / "fp.csv")
    export_fingerprints(path, [(v, "MV101:ON") for v in vectors])
    X, labels = load_fingerprints(path)
    assert np.array_equal(X, fingerprint_matrix(vectors))
    assert labels == ["MV101:ON"] * 3
