import numpy as np
import pytest

from tcfinger.errors import BadInput, ConfigError, InsufficientData, InvalidMode, NotApplicable, UnsafeDelay
from tcfinger.plantsim import TankParams, WatermarkPolicy
from tcfinger.watermark import (
    MODE_FLAGS,
    CriticalStateConfig,
    conditional_entropy,
    delay_grid,
    draw_delay,
    draw_delays,
    entropy_analysis,
    ks_two_sample,
    mode_for_flags,
    mutual_information,
    nist_subset,
    replay_check,
    replay_power,
    safe_delay_budget,
    serialize_delays,
    stage_times,
    time_to_critical,
)
from tcfinger.watermark.nist import TESTS, cumulative_sums, monobit, runs

STAGE1 = TankParams(name="T101", level_sensor="LIT101")
STAGE2 = TankParams(name="T301", level_sensor="LIT301", max_out_rate=3.5)


# ============================================================================
# Time to critical state
# ============================================================================
def test_single_stage_times():
    high, low = stage_times(STAGE1)
    assert high == pytest.approx(416.66, abs=0.01)
    assert low == pytest.approx(744.68, abs=0.01)


def test_mixed_mode_takes_the_faster_stage():
    assert time_to_critical(CriticalStateConfig([STAGE1, STAGE2]), 7) == pytest.approx((100.0, 100.0))


def test_cascaded_mode_is_an_interval():
    lower, upper = time_to_critical(CriticalStateConfig([STAGE1, STAGE2]), 8)
    t1 = stage_times(STAGE1)[0]
    t2 = stage_times(STAGE2)[0]
    assert lower == pytest.approx(min(t1, t2))
    assert upper == pytest.approx(t1 + t2)


@pytest.mark.parametrize("mode", range(1, 9))
def test_every_mode_round_trips_through_its_flags(mode):
    assert mode_for_flags(*MODE_FLAGS[mode]) == mode
    lower, upper = time_to_critical(CriticalStateConfig([STAGE1, STAGE2]), mode)
    assert 0 < lower <= upper


def test_impossible_modes():
    with pytest.raises(InvalidMode):
        mode_for_flags(True, True, False, False)
    with pytest.raises(InvalidMode):
        time_to_critical(CriticalStateConfig([STAGE1]), 1)
    with pytest.raises(InvalidMode):
        time_to_critical(CriticalStateConfig([STAGE1, STAGE2]), 9)
    with pytest.raises(ConfigError):
        CriticalStateConfig([])


# ============================================================================
# Delays
# ============================================================================
def test_delay_grid_and_draws_stay_in_range():
    policy = WatermarkPolicy(enabled=True, delay_min_s=5, delay_max_s=36)
    assert delay_grid(policy).tolist() == list(range(5, 37))
    rng = np.random.default_rng(0)
    drawn = draw_delays(policy, 416.66, 5000, rng)
    assert drawn.min() == 5 and drawn.max() == 36
    assert 5 <= draw_delay(policy, 416.66, rng) <= 36


def test_delay_above_safety_fraction_is_unsafe():
    policy = WatermarkPolicy(enabled=True, delay_min_s=5, delay_max_s=500)
    with pytest.raises(UnsafeDelay):
        draw_delay(policy, 416.66, np.random.default_rng(0))


def test_safe_budget_is_the_fastest_stage():
    assert safe_delay_budget([STAGE1, STAGE2]) == pytest.approx(100.0)


def test_serialized_bits_are_fixed_width():
    assert serialize_delays([5, 36, 6], 5, 36).tolist() == [0] * 5 + [1] * 5 + [0, 0, 0, 0, 1]
    with pytest.raises(BadInput):
        serialize_delays([4], 5, 36)
    with pytest.raises(BadInput):
        serialize_delays([5], 5, 5)


# ============================================================================
# Kolmogorov-Smirnov
# ============================================================================
def test_identical_samples_have_zero_distance():
    x = np.random.default_rng(1).normal(10.0, 1.0, 40)
    result = ks_two_sample(x, x)
    assert result.d_stat == 0.0
    assert not result.distinct
    assert result.p_value == pytest.approx(1.0)


def test_disjoint_samples_have_unit_distance():
    result = ks_two_sample(np.arange(10.0), np.arange(10.0) + 100.0)
    assert result.d_stat == 1.0
    assert result.distinct


def test_distance_is_symmetric():
    rng = np.random.default_rng(2)
    a, b = rng.normal(0.0, 1.0, 30), rng.normal(0.5, 1.0, 45)
    assert ks_two_sample(a, b).d_stat == ks_two_sample(b, a).d_stat


def test_shifted_sample_is_distinct():
    rng = np.random.default_rng(3)
    result = ks_two_sample(rng.normal(0.0, 1.0, 50), rng.normal(3.0, 1.0, 50))
    assert result.distinct
    assert result.p_value < 0.05


def test_ks_input_checks():
    with pytest.raises(InsufficientData):
        ks_two_sample([1.0, 2.0, 3.0, 4.0], np.arange(10.0))
    with pytest.raises(BadInput):
        ks_two_sample(np.arange(10.0), np.arange(10.0), alpha=1.5)


def test_replay_check_expects_the_drawn_delays():
    normal = np.random.default_rng(4).normal(9.0, 0.3, 60)
    delays = np.random.default_rng(5).integers(5, 37, 60)
    assert not replay_check(normal, normal + delays, delays=delays).distinct
    assert replay_check(normal, normal, delays=delays).distinct
    with pytest.raises(BadInput):
        replay_check(normal, normal, delays=delays[:10])


def test_replay_power_grows_with_delay():
    normal = np.random.default_rng(6).normal(9.0, 0.3, 200)
    long_delay = replay_power(normal, 35.0, trials=100, seed=1)
    short_delay = replay_power(normal, 5.0, trials=100, seed=1)
    assert long_delay.power >= 0.95
    assert short_delay.power < long_delay.power


# ============================================================================
# Entropy
# ============================================================================
def test_variable_tells_everything_about_itself():
    x = np.random.default_rng(7).uniform(0.0, 1.0, 2000)
    assert conditional_entropy(x, x) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(x, x) == pytest.approx(1.0, abs=0.01)


def test_independent_variables_keep_their_entropy():
    rng = np.random.default_rng(8)
    x, y = rng.uniform(0.0, 1.0, 5000), rng.uniform(0.0, 1.0, 5000)
    assert conditional_entropy(x, y) >= 0.9
    assert mutual_information(x, y) < 0.05


def test_entropy_matrix_across_processes():
    rng = np.random.default_rng(9)
    a = rng.uniform(0.0, 1.0, (500, 2))
    b = rng.uniform(0.0, 1.0, (500, 2))
    c = np.column_stack([rng.uniform(0.0, 1.0, 500), np.full(500, 3.0)])
    report = entropy_analysis({"A": a, "B": b, "C": c})
    assert report.processes == ["A", "B", "C"]
    assert np.allclose(np.diag(report.conditional), 0.0, atol=1e-12)
    assert np.all(report.cross_conditional() >= 0.8)
    assert report.skipped == ["C:1"]


def test_entropy_needs_two_processes_with_enough_samples():
    with pytest.raises(InsufficientData):
        entropy_analysis({"A": np.arange(100.0)})
    with pytest.raises(InsufficientData):
        entropy_analysis({"A": np.arange(100.0), "B": np.arange(10.0)})


# ============================================================================
# Randomness
# ============================================================================
def test_constant_bits_fail():
    bits = np.zeros(1000, dtype=int)
    assert monobit(bits) < 0.01
    assert cumulative_sums(bits) < 0.01
    assert not nist_subset(bits).passed()


def test_alternating_bits_balance_but_fail_runs():
    bits = np.tile([0, 1], 500)
    assert monobit(bits) == pytest.approx(1.0)
    assert runs(bits) < 0.01


def test_short_sequences_are_not_applicable():
    report = nist_subset([0, 1] * 20)
    assert "monobit" in report.not_applicable
    assert not report.passed()


def test_sequences_below_a_thousand_bits_are_not_applicable():
    bits = np.random.default_rng(11).integers(0, 2, 500)
    report = nist_subset(bits)
    assert set(report.not_applicable) >= set(TESTS)
    assert not report.passed()
    with pytest.raises(NotApplicable):
        monobit(bits)


def test_non_binary_input():
    with pytest.raises(BadInput):
        nist_subset([0, 1, 2])


def test_uniform_power_of_two_delays_look_random():
    policy = WatermarkPolicy(enabled=True, delay_min_s=5, delay_max_s=36)
    delays = draw_delays(policy, 416.66, 20000, np.random.default_rng(10))
    bits = serialize_delays(delays, 5, 36)
    reports = [nist_subset(chunk) for chunk in np.array_split(bits, 10)]
    p_values = [p for r in reports for p in r.p_values.values()]
    assert all(not r.not_applicable for r in reports)
    assert np.mean([p > 0.01 for p in p_values]) >= 0.9
