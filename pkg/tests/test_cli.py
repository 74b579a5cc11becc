import json

import pytest

from cli.main import create_parser, main
from tcfinger.plantsim import default_scenario, load_scenario


def _run(argv):
    with pytest.raises(SystemExit) as exit_info:
        main(argv)
    return exit_info.value.code


@pytest.fixture
def some_csv(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("t,MV101\n0,1\n", encoding="utf-8")
    return str(path)


def test_command_is_required():
    assert _run([]) == 2


def test_detect_needs_parameters_or_fit(some_csv):
    assert _run(["detect", "--data", some_csv]) == 2
    assert _run(["detect", "--data", some_csv, "--fit", "--params", some_csv]) == 2


def test_missing_input_file(tmp_path):
    assert _run(["fingerprint", "--data", str(tmp_path / "nope.csv")]) == 2


def test_replay_needs_live_data(some_csv):
    assert _run(["attack", "--replay", some_csv]) == 2


def test_overrides_reach_the_namespace():
    args = create_parser().parse_args(["simulate", "--seed", "3", "--duration", "50", "--watermark"])
    assert (args.seed, args.duration_s, args.watermark) == (3, 50.0, True)


def test_simulation_is_reproducible_from_the_command_line(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert _run(["simulate", "--seed", "7", "--duration", "300", "--out", str(first)]) == 0
    assert _run(["simulate", "--seed", "7", "--duration", "300", "--out", str(second)]) == 0
    assert (first / "dataset.csv").read_bytes() == (second / "dataset.csv").read_bytes()
    assert (first / "truth.json").exists()
    assert json.loads((first / "config.json").read_text(encoding="utf-8"))["seed"] == 7


def test_dump_scenario(tmp_path):
    path = tmp_path / "plant.json"
    assert _run(["simulate", "--dump-scenario", str(path)]) == 0
    assert load_scenario(str(path)) == default_scenario()


@pytest.mark.parametrize("content", ["{", '{"kernel": "laplace"}', '{"unknown_field": 1}', "[1, 2]"])
def test_bad_configuration_exits_with_one(tmp_path, capsys, content):
    path = tmp_path / "run.json"
    path.write_text(content, encoding="utf-8")
    assert _run(["simulate", "--config", str(path), "--out", str(tmp_path / "out")]) == 1
    assert "ConfigError" in capsys.readouterr().out


def test_malformed_pairing_exits_with_one(tmp_path, capsys):
    out = tmp_path / "out"
    assert _run(["simulate", "--seed", "1", "--duration", "200", "--out", str(out)]) == 0
    assert _run(["fingerprint", "--data", str(out / "dataset.csv"), "--pairs", "MV101", "--out", str(out)]) == 1
    assert "ACTUATOR:SENSOR" in capsys.readouterr().out
