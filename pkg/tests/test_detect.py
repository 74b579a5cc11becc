import math
from types import SimpleNamespace

import numpy as np
import pytest

from tcfinger.detect import (
    CUSUM,
    NEGATIVE,
    POSITIVE,
    Alarm,
    AlarmLog,
    CusumParams,
    CusumState,
    DetectorParams,
    cusum_step,
    detection_report,
    export_alarms,
    far_table,
    fit_cusum_params,
    fit_detector,
    fit_params,
    load_detector,
    run_detector,
    save_detector,
    tune_thresholds,
)
from tcfinger.errors import BadInput, ConfigError, InsufficientData
from tcfinger.fingerprint import INCOMPLETE, OP_OFF, OP_ON, TransitionEvent
from tcfinger.timeseries import ACTUATOR, SENSOR, make_dataset

FIXTURE = CusumParams(mu=17.79, beta=1.12, t_plus=6.56, t_minus=-3.05)
SPACING = 40


def _stepped(delays_on, delays_off):
    """Valve opening every 2*SPACING samples; the flow switches delays_on/off samples after each command."""
    n = SPACING * (2 * len(delays_on) + 1)
    codes = np.ones(n)
    flow = np.zeros(n)
    for k, (d_on, d_off) in enumerate(zip(delays_on, delays_off)):
        s_on = SPACING * (2 * k + 1)
        s_off = s_on + SPACING
        codes[s_on:s_off] = 2
        flow[s_on + d_on:s_off + d_off] = 2.4
    return make_dataset([("MV101", ACTUATOR, codes), ("FIT101", SENSOR, flow)])


def _training(seed=0, n=60):
    rng = np.random.default_rng(seed)
    return rng.integers(8, 11, n), rng.integers(9, 12, n)


def _attack(attack_type, start, end, performed=True):
    return SimpleNamespace(type=attack_type, start_idx=start, end_idx=end, performed=performed)


def test_step_below_thresholds_accumulates():
    state, alarms = cusum_step(CusumState(), FIXTURE, 20.0)
    assert alarms == frozenset()
    assert state.s_plus == pytest.approx(1.09, abs=1e-12)
    assert state.s_minus == 0.0
    assert state.i == 1


def test_positive_alarm_resets_the_sum():
    state, alarms = cusum_step(CusumState(), FIXTURE, 26.0)
    assert alarms == frozenset({POSITIVE})
    assert state.s_plus == 0.0


def test_negative_alarm():
    state, alarms = cusum_step(CusumState(), FIXTURE, 10.0)
    assert alarms == frozenset({NEGATIVE})
    assert state.s_minus == 0.0


def test_mean_transition_changes_nothing():
    state, alarms = cusum_step(CusumState(), FIXTURE, 17.79)
    assert alarms == frozenset()
    assert (state.s_plus, state.s_minus) == (0.0, 0.0)


@pytest.mark.parametrize("t", [-1.0, math.nan, math.inf])
def test_invalid_transition_time(t):
    with pytest.raises(BadInput):
        cusum_step(CusumState(), FIXTURE, t)


@pytest.mark.parametrize("kwargs", [
    {"mu": 1.0, "beta": -0.1, "t_plus": 1.0, "t_minus": -1.0},
    {"mu": 1.0, "beta": 0.1, "t_plus": 0.0, "t_minus": -1.0},
    {"mu": 1.0, "beta": 0.1, "t_plus": 1.0, "t_minus": 0.5},
])
def test_invalid_parameters(kwargs):
    with pytest.raises(ConfigError):
        CusumParams(**kwargs)


def test_sums_stay_within_thresholds():
    state = CusumState()
    for t in np.random.default_rng(2).normal(17.79, 3.0, 500):
        state, _ = cusum_step(state, FIXTURE, max(t, 0.0))
        assert 0.0 <= state.s_plus <= FIXTURE.t_plus
        assert FIXTURE.t_minus <= state.s_minus <= 0.0


def test_sustained_shift_alarms_in_expected_steps():
    params = CusumParams(mu=18.0, beta=0.5, t_plus=5.0, t_minus=-5.0)
    state = CusumState()
    for step in range(1, 10):
        state, alarms = cusum_step(state, params, 20.0)
        if alarms:
            break
    assert step == math.ceil(5.0 / (2.0 - 0.5))
    assert alarms == frozenset({POSITIVE})


def test_change_start_tracks_last_zero():
    params = CusumParams(mu=10.0, beta=0.0, t_plus=100.0, t_minus=-100.0)
    state = CusumState()
    for t in (9.0, 9.0, 12.0, 12.0):
        state, _ = cusum_step(state, params, t)
    assert state.plus_start == 1
    assert state.s_plus == 4.0


def test_fit_mean_and_half_deviation():
    assert fit_cusum_params([17.0, 19.0, 17.0, 19.0, 18.0]) == pytest.approx((18.0, 0.5))
    assert fit_cusum_params([7.0] * 6) == (7.0, 0.0)


def test_fit_ignores_incomplete_events():
    events = [TransitionEvent("MV101", OP_ON, i, INCOMPLETE) for i in range(10)]
    with pytest.raises(InsufficientData):
        fit_cusum_params(events)


def test_constant_training_gets_floor_thresholds():
    assert tune_thresholds([7.0] * 25) == (1e-9, -1e-9)


def test_tuned_thresholds_respect_false_alarm_budget():
    times = np.random.default_rng(0).normal(18.0, 1.0, 1000)
    params = fit_params(times, max_far=0.02)
    state = CusumState()
    counts = {POSITIVE: 0, NEGATIVE: 0}
    for t in times:
        state, alarms = cusum_step(state, params, t)
        for direction in alarms:
            counts[direction] += 1
    assert counts[POSITIVE] / times.size <= 0.02
    assert counts[NEGATIVE] / times.size <= 0.02


def test_zero_budget_gives_widest_thresholds():
    times = np.random.default_rng(1).normal(18.0, 1.0, 200)
    loose = tune_thresholds(times, max_far=0.05)
    strict = tune_thresholds(times, max_far=0.0)
    assert strict[0] >= loose[0]
    assert strict[1] <= loose[1]


def test_tuning_needs_enough_transitions():
    with pytest.raises(InsufficientData):
        tune_thresholds([18.0] * 10)


def test_detector_flags_slow_openings():
    on, off = _training()
    params = fit_detector(_stepped(on, off), {"MV101": "FIT101"})
    assert set(params.cusum) == {("MV101", OP_ON), ("MV101", OP_OFF)}
    assert all(rate <= 0.04 for rate in far_table(run_detector(_stepped(on, off), params)).values())

    attacked_on, attacked_off = _training(seed=1)
    attacked_on[30:36] = 25
    log = run_detector(_stepped(attacked_on, attacked_off), params)
    hits = [a for a in log.by_category(CUSUM) if a.op == OP_ON and a.direction == POSITIVE]
    assert any(SPACING * 61 <= a.idx <= SPACING * 72 for a in hits)

    start, end = SPACING * 61, SPACING * 71 + 26
    rows = detection_report(log, SimpleNamespace(attacks=[_attack("C1", start, end), _attack("B1", 0, 10, performed=False)]))
    assert [r.attack_type for r in rows] == ["C1"]
    assert rows[0].performed == 1 and rows[0].detected == 1
    assert rows[0].overall == 100.0 and rows[0].cusum == 100.0


def test_short_training_cannot_fit(valve_dataset):
    with pytest.raises(InsufficientData):
        fit_detector(valve_dataset, {"MV101": "FIT101"})


def test_missing_parameters_are_a_config_error(valve_dataset):
    params = DetectorParams(pairings={"MV101": "FIT101"}, cusum={("MV101", OP_ON): FIXTURE}, thresholds={})
    with pytest.raises(ConfigError):
        run_detector(valve_dataset, params)


def test_alarm_inside_grace_counts():
    log = AlarmLog(sample_period_s=1.0, timeout_s=120.0)
    log.alarms.append(Alarm("MV101", OP_ON, INCOMPLETE, 3, 3, 650, 650))
    truth = SimpleNamespace(attacks=[_attack("D1", 100, 600), _attack("D1", 1000, 1200)])
    row = detection_report(log, truth)[0]
    assert (row.performed, row.detected) == (2, 1)
    assert row.incomplete == 50.0 and row.cusum == 0.0
    assert detection_report(log, truth, grace_s=10.0)[0].detected == 0


def test_cusum_alarm_credits_only_the_operation_that_raised_it():
    log = AlarmLog(sample_period_s=1.0, timeout_s=120.0)
    log.alarms.append(Alarm("MV101", OP_ON, CUSUM, 10, 2, 5000, 100, POSITIVE, 4970))
    assert log.alarms[0].window() == (4970, 5000)
    truth = SimpleNamespace(attacks=[_attack("A1", 1000, 1030), _attack("A1", 4900, 4930)])
    row = detection_report(log, truth)[0]
    assert (row.performed, row.detected, row.cusum) == (2, 1, 50.0)


def test_saved_detector_runs_identically(tmp_path):
    on, off = _training()
    ds = _stepped(on, off)
    params = fit_detector(ds, {"MV101": "FIT101"})
    path = str(tmp_path / "cusum.json")
    save_detector(params, path)
    loaded = load_detector(path)
    assert loaded.cusum == params.cusum
    assert loaded.thresholds == params.thresholds
    first, second = run_detector(ds, params), run_detector(ds, loaded)
    assert first.alarms == second.alarms
    export_alarms(first, str(tmp_path / "alarms.csv"))
    assert (tmp_path / "alarms.csv").read_text(encoding="utf-8").startswith("actuator,op,category")
