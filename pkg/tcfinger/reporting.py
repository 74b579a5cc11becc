"""
Report writers: CSV tables, the text summary and SVG charts.

CSV is the canonical output; the SVG charts are for reading.
"""

import csv
import os
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from tcfinger.config.run_config import RunConfig  # noqa: E402
from tcfinger.detect import DetectionRow  # noqa: E402
from tcfinger.errors import IoError  # noqa: E402
from tcfinger.watermark.entropy import EntropyReport  # noqa: E402
from tcfinger.watermark.nist import PASS_LEVEL, NistReport  # noqa: E402
from tcfinger.watermark.replay import PowerResult  # noqa: E402

KERNEL_TITLES = {"linear": "Linear", "polynomial": "Polynomial", "rbf": "RBF", "sigmoid": "Sigmoid"}

# Fixed salt and no date keep SVG output identical across runs
plt.rcParams["svg.hashsalt"] = "tcfinger"
_SVG_METADATA = {"Date": None}

AccuracyTable = Dict[str, Dict[str, float]]


def _write_rows(path: str, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def write_accuracy_table(path: str, table: AccuracyTable) -> None:
    """Rows like `Accuracy (Opening)`, one column per kernel, percentages with two decimals."""
    kernels: List[str] = []
    for row in table.values():
        kernels.extend(k for k in row if k not in kernels)
    rows = [[label] + [f"{100.0 * accs[k]:.2f}%" if k in accs else "" for k in kernels] for label, accs in table.items()]
    _write_rows(path, ["Kernel"] + [KERNEL_TITLES.get(k, k) for k in kernels], rows)


def write_detection_table(path: str, rows: Sequence[DetectionRow]) -> None:
    header = ["Attack", "Performed", "Overall Detection Rate", "Detection Rate-CUSUM",
              "Detection Rate-Incomplete Operations", "Detection Rate-Timed Out Operations"]
    body = [[r.attack_type, r.performed, f"{r.overall:.2f}%", f"{r.cusum:.2f}%", f"{r.incomplete:.2f}%", f"{r.timed_out:.2f}%"] for r in rows]
    _write_rows(path, header, body)


def write_far_table(path: str, far: Mapping[Tuple[str, str], float]) -> None:
    _write_rows(path, ["actuator", "op", "false_alarm_rate"], [[a, op, f"{rate:.4f}"] for (a, op), rate in sorted(far.items())])


def write_nist_table(path: str, reports: Sequence[NistReport], level: float = PASS_LEVEL) -> None:
    """One row per test: p-value of every sequence and the share of sequences that pass."""
    tests: List[str] = []
    for report in reports:
        tests.extend(t for t in report.p_values if t not in tests)
    rows = []
    for test in tests:
        values = [r.p_values.get(test) for r in reports]
        passed = sum(1 for v in values if v is not None and v > level)
        rows.append([test] + ["" if v is None else f"{v:.6f}" for v in values] + [f"{passed}/{len(values)}"])
    _write_rows(path, ["test"] + [f"seq_{i + 1}" for i in range(len(reports))] + ["passed"], rows)


def write_entropy_matrix(path: str, report: EntropyReport) -> None:
    rows = []
    for i, name in enumerate(report.processes):
        rows.append([name, f"{report.entropy[i]:.4f}"] + [f"{v:.4f}" for v in report.conditional[i]])
    _write_rows(path, ["process", "entropy"] + [f"H(.|{p})" for p in report.processes], rows)


def write_power_table(path: str, results: Sequence[PowerResult]) -> None:
    _write_rows(path, ["delay_s", "trials", "flagged", "power"], [[f"{r.delay_s:g}", r.trials, r.flagged, f"{r.power:.4f}"] for r in results])


def banner(title: str) -> List[str]:
    return ["=" * 60, title, "=" * 60]


def write_text_report(path: str, sections: Mapping[str, Sequence[str]], config: Optional[RunConfig] = None) -> None:
    """Plain-text summary; the resolved configuration is appended so the report stands alone."""
    lines: List[str] = []
    for title, body in sections.items():
        lines.extend(banner(title))
        lines.extend(body)
        lines.append("")
    if config is not None:
        lines.extend(banner("CONFIGURATION"))
        lines.append(config.model_dump_json(indent=2))
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def format_accuracy_table(table: AccuracyTable) -> List[str]:
    kernels: List[str] = []
    for row in table.values():
        kernels.extend(k for k in row if k not in kernels)
    lines = [f"{'':<24}" + "".join(f"{KERNEL_TITLES.get(k, k):>12}" for k in kernels)]
    for label, accs in table.items():
        lines.append(f"{label:<24}" + "".join(f"{100.0 * accs[k]:>11.2f}%" if k in accs else f"{'':>12}" for k in kernels))
    return lines


def format_detection_table(rows: Sequence[DetectionRow]) -> List[str]:
    lines = [f"{'Attack':<8}{'Performed':>10}{'Overall':>10}{'CUSUM':>10}{'Incompl.':>10}{'Timeout':>10}"]
    for r in rows:
        lines.append(f"{r.attack_type:<8}{r.performed:>10}{r.overall:>9.1f}%{r.cusum:>9.1f}%{r.incomplete:>9.1f}%{r.timed_out:>9.1f}%")
    return lines


def _save(fig, path: str) -> None:
    try:
        fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e
    finally:
        plt.close(fig)


def plot_transition_series(path: str, series: Mapping[str, Sequence[float]], title: str = "Transition times") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    for name, values in series.items():
        ax.plot(np.arange(len(values)), values, marker=".", linestyle="-", linewidth=0.8, label=name)
    ax.set_xlabel("Operation")
    ax.set_ylabel("Transition time (s)")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def _ecdf(values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(values, dtype=float))
    return x, np.arange(1, x.size + 1) / x.size


def plot_ecdf(path: str, samples: Mapping[str, Sequence[float]], title: str = "Time Constant ECDF") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, values in samples.items():
        x, y = _ecdf(values)
        ax.step(x, y, where="post", label=name)
    ax.set_xlabel("Time Constant (s)")
    ax.set_ylabel("F(x)")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_fingerprint_scatter(path: str, X: np.ndarray, labels: Sequence[str], x_feature: int = 0, y_feature: int = 1,
                             names: Sequence[str] = ("mean", "std_dev")) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    labels = list(labels)
    for label in sorted(set(labels)):
        mask = np.array([lab == label for lab in labels])
        ax.scatter(X[mask, x_feature], X[mask, y_feature], s=12, label=label)
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    ax.set_title("Fingerprint clusters")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def output_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)
