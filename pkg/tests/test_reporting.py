import csv

import numpy as np

from tcfinger import reporting
from tcfinger.config.run_config import RunConfig
from tcfinger.detect import DetectionRow
from tcfinger.watermark import NistReport, PowerResult


def _read(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_accuracy_table(tmp_path):
    path = str(tmp_path / "accuracy.csv")
    reporting.write_accuracy_table(path, {
        "Accuracy (Opening)": {"linear": 1.0, "rbf": 0.9876},
        "Accuracy (Closing)": {"linear": 0.5},
    })
    rows = _read(path)
    assert rows[0] == ["Kernel", "Linear", "RBF"]
    assert rows[1] == ["Accuracy (Opening)", "100.00%", "98.76%"]
    assert rows[2] == ["Accuracy (Closing)", "50.00%", ""]


def test_detection_table(tmp_path):
    path = str(tmp_path / "detection.csv")
    reporting.write_detection_table(path, [DetectionRow("C1", 4, 3, 75.0, 50.0, 25.0, 0.0)])
    rows = _read(path)
    assert rows[0][0] == "Attack" and len(rows[0]) == 6
    assert rows[1] == ["C1", "4", "75.00%", "50.00%", "25.00%", "0.00%"]


def test_nist_table_counts_passing_sequences(tmp_path):
    path = str(tmp_path / "nist.csv")
    reports = [NistReport(100, {"monobit": 0.5}), NistReport(100, {"monobit": 0.001})]
    reporting.write_nist_table(path, reports)
    rows = _read(path)
    assert rows[0] == ["test", "seq_1", "seq_2", "passed"]
    assert rows[1][-1] == "1/2"


def test_power_table(tmp_path):
    path = str(tmp_path / "power.csv")
    reporting.write_power_table(path, [PowerResult(35.0, 100, 97)])
    assert _read(path)[1] == ["35", "100", "97", "0.9700"]


def test_text_report_appends_configuration(tmp_path):
    path = tmp_path / "summary.txt"
    reporting.write_text_report(str(path), {"DETECTION": ["all good"]}, RunConfig(seed=3))
    text = path.read_text(encoding="utf-8")
    assert "DETECTION" in text and "all good" in text
    assert "CONFIGURATION" in text and '"seed": 3' in text


def test_svg_charts_are_reproducible(tmp_path):
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    series = {"MV1": np.linspace(8.0, 9.0, 20), "MV2": np.linspace(9.0, 10.0, 20)}
    reporting.plot_ecdf(str(first), series)
    reporting.plot_ecdf(str(second), series)
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text(encoding="utf-8").lstrip().startswith("<?xml")
