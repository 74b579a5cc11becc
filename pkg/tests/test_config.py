import json
from pathlib import Path

import pytest

from tcfinger.config.config_utils import dump_config, load_config
from tcfinger.config.run_config import RunConfig
from tcfinger.errors import ConfigError


def test_defaults_without_a_file():
    cfg = load_config()
    assert cfg == RunConfig()
    assert cfg.kernel == "rbf" and cfg.timeout_s == 120.0 and cfg.delay_max_s == 36.0


def test_overrides_win_over_the_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 7, "folds": 3, "ident": {"order": 3}}), encoding="utf-8")
    cfg = load_config(str(path), {"seed": 11, "folds": None})
    assert cfg.seed == 11
    assert cfg.folds == 3
    assert cfg.ident.order == 3 and cfg.ident.horizon == 40


def test_bundled_configuration_loads():
    cfg = load_config(str(Path(__file__).parents[1] / "tcfinger" / "config.json"))
    assert cfg.seed == 7 and cfg.workers == 4


@pytest.mark.parametrize("data", [
    {"folds": 1},
    {"alpha": 1.0},
    {"delay_min_s": 40, "delay_max_s": 36},
    {"scenario": "does/not/exist.json"},
    {"ident": {"order": 0}},
    {"ident": {"order": 21, "horizon": 40}},
    {"ident": {"order": 2, "horizon": 3}},
])
def test_invalid_values(tmp_path, data):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("no/such/run.json")


def test_dumped_configuration_reloads(tmp_path):
    cfg = RunConfig(seed=5, kernel="linear", out_dir=str(tmp_path))
    path = dump_config(cfg, str(tmp_path / "nested"))
    assert load_config(path) == cfg
