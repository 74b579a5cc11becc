"""
Study engine

Runs the experiments end to end on simulated data:
- Actuator and state identification from Time-Constant fingerprints (test bench)
- Five same-type valves told apart
- CUSUM detection over a scripted attack campaign on the plant
- Watermark replay power, fingerprint entropy and randomness of delay draws
and writes every table, chart and the summary report of a run.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from tcfinger.classify import KERNELS, cross_validate
from tcfinger.config.config_utils import dump_config
from tcfinger.config.run_config import RunConfig
from tcfinger.detect import (
    AlarmLog,
    DetectionRow,
    DetectorParams,
    detection_report,
    export_alarms,
    far_table,
    fit_detector,
    run_detector,
    save_detector,
)
from tcfinger.fingerprint import (
    OP_OFF,
    OP_ON,
    FeatureVector,
    chunk_features,
    export_fingerprints,
    extract_transitions,
    fingerprint_matrix,
    response_times,
    sensor_thresholds,
    transition_times,
)
from tcfinger.plantsim import (
    TRACKED_PAIRS,
    GroundTruth,
    Scenario,
    WatermarkPolicy,
    bench_transition_times,
    classification_devices,
    default_scenario,
    entropy_devices,
    five_valve_devices,
    load_scenario,
    replay_attack,
    scripted_campaign,
    simulate,
)
from tcfinger import reporting
from tcfinger.plantsim.scenario import VALVE, AttackSpec, build_scenario
from tcfinger.timeseries import ActuatorState
from tcfinger.watermark import (
    EntropyReport,
    KsResult,
    NistReport,
    PowerResult,
    draw_delays,
    entropy_analysis,
    nist_subset,
    replay_check,
    replay_power,
    safe_delay_budget,
    serialize_delays,
)

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s [%(processName)s] %(levelname)s: %(message)s',
    datefmt='%H:%M:%S'
)

BENCH_PERIOD_S = 0.1
BENCH_DWELL_S = 40.0
ENTROPY_PERIOD_S = 0.05
ENTROPY_DWELL_S = 60.0
ENTROPY_OPERATIONS = 1300
TRAINING_DURATION_S = 120000.0
REPLAY_DELAYS_S = (5.0, 10.0, 20.0, 35.0)
REPLAY_PAIR = ("MV101", "FIT101")
REPLAY_DURATION_S = 100000.0
REPLAY_TRIALS = 100
NIST_DRAWS = 100000
NIST_SEQUENCES = 10

AccuracyTable = Dict[str, Dict[str, float]]


def resolve_scenario(cfg: RunConfig, watermark: Optional[WatermarkPolicy] = None) -> Scenario:
    scenario = load_scenario(cfg.scenario) if cfg.scenario else default_scenario()
    if watermark is not None:
        scenario = build_scenario({**scenario.model_dump(), "watermark": watermark.model_dump()})
    return scenario


def with_attacks(scenario: Scenario, attacks: Sequence[AttackSpec]) -> Scenario:
    return build_scenario({**scenario.model_dump(), "attacks": [a.model_dump() for a in attacks]})


def _chunks(times: np.ndarray, chunk_size: int) -> np.ndarray:
    return fingerprint_matrix(chunk_features(times, chunk_size))


def _stack(groups: Sequence[Tuple[str, np.ndarray]]) -> Tuple[np.ndarray, List[str]]:
    X = np.vstack([m for _, m in groups])
    labels = [label for label, m in groups for _ in range(m.shape[0])]
    return X, labels


# =============================================================================
# FINGERPRINT STUDIES
# =============================================================================

@dataclass
class ClassificationResult:
    """
    Attributes:
        actuators: Accuracy (Opening) / Accuracy (Closing) rows, device labels
        states: One Accuracy (<valve>) row per valve, open vs close labels
        fingerprints: ((op, device), chunk matrix) pairs behind the tables
        times: device -> ON transition times, for charts
    """
    actuators: AccuracyTable = field(default_factory=dict)
    states: AccuracyTable = field(default_factory=dict)
    fingerprints: List[Tuple[Tuple[str, str], np.ndarray]] = field(default_factory=list)
    times: Dict[str, np.ndarray] = field(default_factory=dict)


def _cv(cfg: RunConfig, X: np.ndarray, labels: List[str], kernels: Sequence[str]) -> Dict[str, float]:
    return cross_validate(X, labels, folds=cfg.folds, kernels=kernels, epochs=cfg.epochs, lam=cfg.lam, seed=cfg.seed, workers=cfg.workers)


def classification_study(cfg: RunConfig, kernels: Sequence[str] = KERNELS) -> ClassificationResult:
    """Which device is operating, and is a valve opening or closing, from chunked Time Constants."""
    devices = classification_devices()
    times = bench_transition_times(devices, cfg.operations_per_device, BENCH_DWELL_S, BENCH_PERIOD_S, cfg.seed, cfg.timeout_s)
    result = ClassificationResult(times={d: t[OP_ON] for d, t in times.items()})

    for op, row in ((OP_ON, "Accuracy (Opening)"), (OP_OFF, "Accuracy (Closing)")):
        groups = [(d.device_id, _chunks(times[d.device_id][op], cfg.chunk_size)) for d in devices]
        result.fingerprints.extend(((op, label), m) for label, m in groups)
        X, labels = _stack(groups)
        logging.info(f"{row}: {X.shape[0]} fingerprints from {len(devices)} devices")
        result.actuators[row] = _cv(cfg, X, labels, kernels)

    for device in devices:
        if device.kind != VALVE:
            continue
        groups = [("open", _chunks(times[device.device_id][OP_ON], cfg.chunk_size)),
                  ("close", _chunks(times[device.device_id][OP_OFF], cfg.chunk_size))]
        X, labels = _stack(groups)
        result.states[f"Accuracy ({device.device_id})"] = _cv(cfg, X, labels, kernels)
    return result


def five_valve_study(cfg: RunConfig, kernels: Sequence[str] = KERNELS) -> AccuracyTable:
    """Five valves of the same type with a small spread of nominal timing."""
    devices = five_valve_devices()
    times = bench_transition_times(devices, cfg.operations_per_device, BENCH_DWELL_S, BENCH_PERIOD_S, cfg.seed, cfg.timeout_s)
    table: AccuracyTable = {}
    for op, row in ((OP_ON, "Accuracy (Opening)"), (OP_OFF, "Accuracy (Closing)")):
        X, labels = _stack([(d.device_id, _chunks(times[d.device_id][op], cfg.chunk_size)) for d in devices])
        table[row] = _cv(cfg, X, labels, kernels)
    return table


# =============================================================================
# DETECTION STUDY
# =============================================================================

@dataclass
class DetectionResult:
    params: DetectorParams
    far: Dict[Tuple[str, str], float]
    rows: List[DetectionRow]
    log: AlarmLog
    truth: GroundTruth


def tracked_pairs(scenario: Scenario) -> Dict[str, str]:
    names = set(scenario.channel_names())
    tracked = {a: s for a, s in TRACKED_PAIRS if a in names and s in names}
    return tracked or scenario.pairings()


def detection_study(cfg: RunConfig, training_s: float = TRAINING_DURATION_S) -> DetectionResult:
    """
    Fit the detectors on an attack-free run, then replay the scripted campaign through them.

    False alarm rates are measured on the attack-free run the thresholds were tuned on.
    """
    scenario = resolve_scenario(cfg)
    pairs = tracked_pairs(scenario)

    logging.info(f"Training run: {training_s:.0f} s of attack-free operation")
    training, _ = simulate(scenario, training_s, cfg.seed)
    params = fit_detector(training, pairs, cfg.timeout_s, cfg.max_far)
    far = far_table(run_detector(training, params))

    attacks, duration_s = scripted_campaign(cfg.attacks_per_type, cfg.seed, scenario.sample_period_s)
    logging.info(f"Attack campaign: {len(attacks)} attacks over {duration_s:.0f} s")
    attacked, truth = simulate(with_attacks(scenario, attacks), duration_s, cfg.seed + 1)
    log = run_detector(attacked, params)
    rows = detection_report(log, truth)
    for row in rows:
        logging.info(f"{row.attack_type}: {row.detected}/{row.performed} detected ({row.overall:.1f}%)")
    return DetectionResult(params=params, far=far, rows=rows, log=log, truth=truth)


# =============================================================================
# WATERMARK STUDY
# =============================================================================

@dataclass
class WatermarkResult:
    """
    Attributes:
        power: Replay detection power per watermark delay
        honest / replayed: K-S outcome for a watermarked observation and for a replay
        samples: Normal, watermarked and replayed Time Constants, for the ECDF chart
        entropy: Conditional entropy across the entropy-study processes
        nist: One report per bit sequence of serialized delay draws
        budget_s: Time to critical state bounding the delays
    """
    power: List[PowerResult]
    honest: KsResult
    replayed: KsResult
    samples: Dict[str, np.ndarray]
    entropy: EntropyReport
    nist: List[NistReport]
    budget_s: float


def _switch_on_commands(commands: np.ndarray) -> List[Tuple[int, str]]:
    return [(int(i), OP_ON) for i in np.flatnonzero(np.diff(commands.astype(int)) > 0) + 1]


def replay_study(cfg: RunConfig, policy: WatermarkPolicy) -> Tuple[List[PowerResult], KsResult, KsResult, Dict[str, np.ndarray]]:
    """
    Record the plant without watermark, run it live with the watermark, and replay the recording over the live run.

    The defender times every ON command of the replay valve from its own trigger to the
    flow crossing; the check expects the recorded response shifted by the drawn delays.
    """
    actuator, sensor = REPLAY_PAIR
    recorded, recorded_truth = simulate(resolve_scenario(cfg), REPLAY_DURATION_S, cfg.seed)
    live, truth = simulate(resolve_scenario(cfg, policy), REPLAY_DURATION_S, cfg.seed)
    replayed_ds = replay_attack(recorded, live, [(0, len(live))])
    th = sensor_thresholds(recorded, sensor)

    normal_tc = transition_times(extract_transitions(recorded, actuator, sensor, th, cfg.timeout_s), OP_ON)
    power = [replay_power(normal_tc, d, trials=REPLAY_TRIALS, alpha=cfg.alpha, seed=cfg.seed, workers=cfg.workers) for d in REPLAY_DELAYS_S]

    normal = response_times(recorded, sensor, th, _switch_on_commands(recorded_truth.commands[actuator]), cfg.timeout_s)
    draws = [d for d in truth.delays if d.device_id == actuator and d.command == int(ActuatorState.ON)]
    triggers = [(d.trigger_idx, OP_ON) for d in draws]
    watermarked = response_times(live, sensor, th, triggers, cfg.timeout_s)
    replayed = response_times(replayed_ds, sensor, th, triggers, cfg.timeout_s)
    delays = np.array([d.delay_samples for d in draws], dtype=float) * live.sample_period_s
    logging.info(f"Replay study: {normal.size} recorded and {delays.size} watermarked ON commands of {actuator}")

    size = min(normal.size, delays.size)
    honest = replay_check(normal[:size], watermarked, delays[:size], cfg.alpha)
    replay = replay_check(normal[:size], replayed, delays[:size], cfg.alpha)
    logging.info(f"Watermarked observation: {honest.decision} (D={honest.d_stat:.3f}); replay: {replay.decision} (D={replay.d_stat:.3f})")
    return power, honest, replay, {"normal": normal, "watermarked": watermarked - delays, "replayed": replayed - delays}


def entropy_study(cfg: RunConfig, count: int = 8) -> EntropyReport:
    """ON Time Constants of distinct processes, recorded one process at a time and aligned by index."""
    samples = {}
    for i, device in enumerate(entropy_devices(count, cfg.seed)):
        times = bench_transition_times([device], ENTROPY_OPERATIONS, ENTROPY_DWELL_S, ENTROPY_PERIOD_S, cfg.seed + i, cfg.timeout_s)
        samples[device.device_id] = times[device.device_id][OP_ON]
    size = min(t.size for t in samples.values())
    return entropy_analysis({name: t[:size] for name, t in samples.items()})


def randomness_study(policy: WatermarkPolicy, budget_s: float, seed: int, draws: int = NIST_DRAWS, sequences: int = NIST_SEQUENCES) -> List[NistReport]:
    rng = np.random.default_rng(seed)
    delays = draw_delays(policy, budget_s, draws, rng)
    bits = serialize_delays(delays, int(round(policy.delay_min_s)), int(round(policy.delay_max_s)))
    reports = [nist_subset(chunk) for chunk in np.array_split(bits, sequences)]
    passed = sum(r.passed() for r in reports)
    logging.info(f"Randomness: {passed}/{len(reports)} sequences of {bits.size // sequences} bits pass every test")
    return reports


def watermark_study(cfg: RunConfig) -> WatermarkResult:
    scenario = resolve_scenario(cfg)
    budget = safe_delay_budget(scenario.tanks)
    policy = WatermarkPolicy(enabled=True, delay_min_s=cfg.delay_min_s, delay_max_s=cfg.delay_max_s, seed=cfg.seed)
    power, honest, replay, samples = replay_study(cfg, policy)
    return WatermarkResult(
        power=power,
        honest=honest,
        replayed=replay,
        samples=samples,
        entropy=entropy_study(cfg),
        nist=randomness_study(policy, budget, cfg.seed),
        budget_s=budget,
    )


# =============================================================================
# REPORT
# =============================================================================

def write_classification(cfg: RunConfig, result: ClassificationResult, five: AccuracyTable) -> Dict[str, str]:
    out = cfg.out_dir
    paths = {
        "actuators": reporting.output_path(out, "accuracy_actuators.csv"),
        "states": reporting.output_path(out, "accuracy_states.csv"),
        "five_valves": reporting.output_path(out, "accuracy_five_valves.csv"),
        "fingerprints": reporting.output_path(out, "fingerprints.csv"),
        "series_svg": reporting.output_path(out, "transition_times.svg"),
        "scatter_svg": reporting.output_path(out, "fingerprint_scatter.svg"),
    }
    reporting.write_accuracy_table(paths["actuators"], result.actuators)
    reporting.write_accuracy_table(paths["states"], result.states)
    reporting.write_accuracy_table(paths["five_valves"], five)

    rows = []
    for (op, label), matrix in result.fingerprints:
        rows.extend((FeatureVector(*row.tolist()), f"{label}:{op}") for row in matrix)
    export_fingerprints(paths["fingerprints"], rows)

    reporting.plot_transition_series(paths["series_svg"], {d: t[:200] for d, t in result.times.items()}, "ON transition times")
    on = [(label, m) for (op, label), m in result.fingerprints if op == OP_ON]
    X, labels = _stack(on)
    reporting.plot_fingerprint_scatter(paths["scatter_svg"], X, labels)
    return paths


def write_detection(cfg: RunConfig, result: DetectionResult) -> Dict[str, str]:
    out = cfg.out_dir
    paths = {
        "detection": reporting.output_path(out, "detection.csv"),
        "far": reporting.output_path(out, "false_alarms.csv"),
        "alarms": reporting.output_path(out, "alarms.csv"),
        "params": reporting.output_path(out, "cusum_params.json"),
    }
    reporting.write_detection_table(paths["detection"], result.rows)
    reporting.write_far_table(paths["far"], result.far)
    export_alarms(result.log, paths["alarms"])
    save_detector(result.params, paths["params"])
    return paths


def write_watermark(cfg: RunConfig, result: WatermarkResult) -> Dict[str, str]:
    out = cfg.out_dir
    paths = {
        "power": reporting.output_path(out, "replay_power.csv"),
        "entropy": reporting.output_path(out, "entropy.csv"),
        "nist": reporting.output_path(out, "nist.csv"),
        "ecdf_svg": reporting.output_path(out, "time_constant_ecdf.svg"),
    }
    reporting.write_power_table(paths["power"], result.power)
    reporting.write_entropy_matrix(paths["entropy"], result.entropy)
    reporting.write_nist_table(paths["nist"], result.nist)
    reporting.plot_ecdf(paths["ecdf_svg"], result.samples, "Time Constant under watermark and replay")
    return paths


def summary_sections(
    classification: Optional[ClassificationResult] = None,
    five: Optional[AccuracyTable] = None,
    detection: Optional[DetectionResult] = None,
    watermark: Optional[WatermarkResult] = None,
) -> Dict[str, List[str]]:
    sections: Dict[str, List[str]] = {}
    if classification is not None:
        sections["ACTUATOR IDENTIFICATION"] = reporting.format_accuracy_table(classification.actuators)
        sections["STATE IDENTIFICATION"] = reporting.format_accuracy_table(classification.states)
    if five is not None:
        sections["FIVE SAME-TYPE VALVES"] = reporting.format_accuracy_table(five)
    if detection is not None:
        lines = reporting.format_detection_table(detection.rows)
        lines.append("")
        lines.extend(f"False alarm rate {a} {op}: {rate:.2%}" for (a, op), rate in sorted(detection.far.items()))
        sections["ATTACK DETECTION"] = lines
    if watermark is not None:
        lines = [f"Time to critical state bound: {watermark.budget_s:.2f} s"]
        lines.extend(f"Replay power at {p.delay_s:g} s: {p.power:.2%} ({p.flagged}/{p.trials})" for p in watermark.power)
        lines.append(f"Watermarked observation: {watermark.honest.decision}, D={watermark.honest.d_stat:.3f}, p={watermark.honest.p_value:.4f}")
        lines.append(f"Replayed observation: {watermark.replayed.decision}, D={watermark.replayed.d_stat:.3f}, p={watermark.replayed.p_value:.4f}")
        cross = watermark.entropy.cross_conditional()
        lines.append(f"Cross-process conditional entropy: min {np.nanmin(cross):.3f}, mean {np.nanmean(cross):.3f}")
        lines.append(f"Per-process entropy: min {np.nanmin(watermark.entropy.entropy):.3f}")
        passed = sum(r.passed() for r in watermark.nist)
        lines.append(f"Randomness: {passed}/{len(watermark.nist)} sequences pass every test")
        sections["WATERMARK"] = lines
    return sections


def run_pipeline(cfg: RunConfig) -> Dict[str, str]:
    """Run every study and write the full report bundle under cfg.out_dir."""
    logging.info("Configuration:")
    logging.info(f"  - Seed: {cfg.seed}")
    logging.info(f"  - Output directory: {cfg.out_dir}")
    logging.info(f"  - Scenario: {cfg.scenario or 'default'}")
    logging.info(f"  - Workers: {cfg.workers or 1}")
    os.makedirs(cfg.out_dir, exist_ok=True)

    classification = classification_study(cfg)
    five = five_valve_study(cfg)
    detection = detection_study(cfg)
    watermark = watermark_study(cfg)

    paths = {"config": dump_config(cfg, cfg.out_dir)}
    paths.update(write_classification(cfg, classification, five))
    paths.update(write_detection(cfg, detection))
    paths.update(write_watermark(cfg, watermark))
    paths["summary"] = reporting.output_path(cfg.out_dir, "summary.txt")
    reporting.write_text_report(paths["summary"], summary_sections(classification, five, detection, watermark), cfg)
    logging.info(f"Report bundle written to {cfg.out_dir} ({len(paths)} files)")
    return paths
