import os

import numpy as np
import pytest

from tcfinger.core import engine
from tcfinger.plantsim import WatermarkPolicy, default_scenario


def test_tracked_pairs_of_the_default_plant():
    assert engine.tracked_pairs(default_scenario()) == {"MV101": "FIT101", "MV201": "FIT201", "P302": "FIT301"}


def test_empty_summary():
    assert engine.summary_sections() == {}


def test_randomness_study_splits_the_draws():
    policy = WatermarkPolicy(enabled=True, delay_min_s=5, delay_max_s=36)
    reports = engine.randomness_study(policy, 416.66, seed=3, draws=20000, sequences=10)
    assert len(reports) == 10
    assert all(r.n_bits == 10000 and not r.not_applicable for r in reports)
    p_values = [p for r in reports for p in r.p_values.values()]
    assert np.mean([p > 0.01 for p in p_values]) >= 0.9


@pytest.mark.slow
def test_classification_study_tables(run_config):
    cfg = run_config.model_copy(update={"operations_per_device": 200})
    result = engine.classification_study(cfg, kernels=["linear"])
    assert set(result.actuators) == {"Accuracy (Opening)", "Accuracy (Closing)"}
    assert set(result.states) == {"Accuracy (MV101)", "Accuracy (MV201)"}
    for table in (result.actuators, result.states):
        assert all(0.0 <= row["linear"] <= 1.0 for row in table.values())

    five = engine.five_valve_study(cfg, kernels=["linear"])
    paths = engine.write_classification(cfg, result, five)
    for key in ("actuators", "states", "five_valves", "fingerprints", "series_svg", "scatter_svg"):
        assert os.path.exists(paths[key])
    sections = engine.summary_sections(result, five)
    assert "ACTUATOR IDENTIFICATION" in sections and "FIVE SAME-TYPE VALVES" in sections


def _best(row):
    return max(row.values())


@pytest.mark.slow
def test_linear_and_polynomial_kernels_identify_the_actuators(run_config):
    cfg = run_config.model_copy(update={"seed": 0, "operations_per_device": 500})
    result = engine.classification_study(cfg, kernels=["linear", "polynomial", "sigmoid"])
    for row in ("Accuracy (Opening)", "Accuracy (Closing)"):
        accuracy = result.actuators[row]
        assert accuracy["linear"] >= 0.95 and accuracy["polynomial"] >= 0.95
        assert min(accuracy["linear"], accuracy["polynomial"]) > accuracy["sigmoid"]
    assert all(_best(row) >= 0.9 for row in result.states.values())


@pytest.mark.slow
def test_five_same_type_valves_are_told_apart(run_config):
    table = engine.five_valve_study(run_config.model_copy(update={"seed": 0, "operations_per_device": 500}))
    assert all(_best(row) >= 0.9 for row in table.values())


@pytest.mark.slow
def test_detection_rates_follow_the_attack_types(run_config):
    result = engine.detection_study(run_config.model_copy(update={"seed": 0, "attacks_per_type": 30}))
    rates = {row.attack_type: row.overall for row in result.rows}
    assert all(row.performed > 0 for row in result.rows)
    assert rates["A1"] <= 40.0 and rates["F1"] <= 40.0
    assert rates["D1"] > rates["A1"] and rates["E1"] > rates["A1"]
    assert rates["C1"] >= 80.0 and rates["D2"] >= 80.0
    assert all(rate <= 0.04 for rate in result.far.values())


@pytest.mark.slow
def test_distinct_processes_keep_high_conditional_entropy(run_config):
    report = engine.entropy_study(run_config.model_copy(update={"seed": 0}))
    assert len(report.processes) == 8
    assert np.all(report.entropy >= 0.9)
    assert np.all(report.cross_conditional() > 0.85)


@pytest.mark.slow
def test_simulated_replay_loses_the_watermark(run_config):
    cfg = run_config.model_copy(update={"seed": 0})
    policy = WatermarkPolicy(enabled=True, delay_min_s=cfg.delay_min_s, delay_max_s=cfg.delay_max_s, seed=cfg.seed)
    power, honest, replayed, samples = engine.replay_study(cfg, policy)
    assert [p.delay_s for p in power] == list(engine.REPLAY_DELAYS_S)
    assert replayed.decision == "distinct"
    assert replayed.d_stat > honest.d_stat
    assert samples["watermarked"].size == samples["replayed"].size > 0
