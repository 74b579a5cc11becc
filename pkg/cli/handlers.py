"""
CLI Handlers, one per subcommand.
Each handler receives the resolved RunConfig and the parsed arguments, writes
its outputs under cfg.out_dir and returns the process exit code.
"""

import argparse
import os
from typing import Dict, List, Optional, Tuple

from tcfinger import reporting
from tcfinger.classify import KERNELS, accuracy, cross_validate, load_svm, predict_many, save_svm, train
from tcfinger.config.config_utils import dump_config
from tcfinger.config.run_config import RunConfig
from tcfinger.core import engine
from tcfinger.detect import (
    detection_report,
    export_alarms,
    far_table,
    fit_detector,
    load_detector,
    run_detector,
    save_detector,
)
from tcfinger.errors import ConfigError
from tcfinger.fingerprint import OP_OFF, OP_ON, chunk_features, export_fingerprints, extract_transitions, load_fingerprints, sensor_thresholds, transition_times
from tcfinger.lti import save_model
from tcfinger.plantsim import WatermarkPolicy, load_ground_truth, replay_attack, save_ground_truth, save_scenario, scripted_campaign, simulate
from tcfinger.plantsim.scenario import ATTACK_TYPES, Scenario
from tcfinger.sysid import IdentConfig, holdout_split, identify, validate
from tcfinger.timeseries import ACTUATOR, Dataset, export_csv, ingest_csv, window


def _out(cfg: RunConfig, name: str) -> str:
    return reporting.output_path(cfg.out_dir, name)


def _ingest(path: str, scenario: Scenario) -> Dataset:
    return ingest_csv(path, scenario.schema())


def _parse_pairs(pairs: Optional[List[str]], scenario: Scenario) -> Dict[str, str]:
    if not pairs:
        return scenario.pairings()
    result = {}
    for entry in pairs:
        actuator, sep, sensor = entry.partition(":")
        if not sep or not actuator or not sensor:
            raise ConfigError(f"Pairing '{entry}' must look like ACTUATOR:SENSOR")
        result[actuator] = sensor
    return result


def _parse_windows(windows: Optional[List[str]], length: int) -> List[Tuple[int, int]]:
    if not windows:
        return [(length // 2, length)]
    result = []
    for entry in windows:
        start, sep, end = entry.partition(":")
        try:
            result.append((int(start), int(end)))
        except ValueError as e:
            raise ConfigError(f"Window '{entry}' must look like START:END") from e
        if not sep:
            raise ConfigError(f"Window '{entry}' must look like START:END")
    return result


# ============================================================================
# Plant
# ============================================================================
def handle_simulate(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Simulate the plant; writes dataset.csv and truth.json."""
    policy = None
    if args.watermark:
        policy = WatermarkPolicy(enabled=True, delay_min_s=cfg.delay_min_s, delay_max_s=cfg.delay_max_s, seed=cfg.seed)
    scenario = engine.resolve_scenario(cfg, policy)

    if args.dump_scenario:
        save_scenario(scenario, args.dump_scenario)
        print(f"[✓] Scenario '{scenario.name}' written to {args.dump_scenario}")
        return 0

    print(f"[*] Simulating '{scenario.name}' for {cfg.duration_s:.0f} s (seed {cfg.seed})")
    ds, truth = simulate(scenario, cfg.duration_s, cfg.seed)
    export_csv(ds, _out(cfg, "dataset.csv"))
    save_ground_truth(truth, _out(cfg, "truth.json"))
    dump_config(cfg, cfg.out_dir)
    if truth.critical_state_reached:
        print(f"[!] Critical state reached {len(truth.critical)} time(s); see truth.json")
    print(f"[✓] {len(ds)} samples written to {_out(cfg, 'dataset.csv')}")
    return 0


def handle_identify(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Fit a model on the first 70% of the trace and score it on the rest."""
    scenario = engine.resolve_scenario(cfg)
    ds = _ingest(args.data, scenario)
    inputs = args.inputs or [ch.name for ch in ds.channels if ch.kind == ACTUATOR]
    outputs = args.outputs or [t.level_sensor for t in scenario.tanks if ds.has(t.level_sensor)]
    settings = cfg.ident
    ident = IdentConfig(order=args.order or settings.order, horizon=settings.horizon, ridge=settings.ridge)

    split, n = holdout_split(ds)
    print(f"[*] Identifying order-{ident.order} model: {', '.join(inputs)} -> {', '.join(outputs)}")
    model = identify(window(ds, 0, split), inputs, outputs, ident)
    report = validate(model, window(ds, split, n), inputs, outputs)
    save_model(_out(cfg, "model.json"), model)
    dump_config(cfg, cfg.out_dir)

    for name, fit in zip(report.outputs, report.best_fit):
        print(f"    {name:<10} hold-out fit {fit:6.2f}%")
    print(f"[✓] Model written to {_out(cfg, 'model.json')}")
    return 0


# ============================================================================
# Fingerprints
# ============================================================================
def handle_fingerprint(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Chunk the complete transition times of every pairing into fingerprint rows labelled ACTUATOR:OP."""
    scenario = engine.resolve_scenario(cfg)
    ds = _ingest(args.data, scenario)
    rows = []
    for actuator, sensor in _parse_pairs(args.pairs, scenario).items():
        events = extract_transitions(ds, actuator, sensor, sensor_thresholds(ds, sensor), cfg.timeout_s)
        for op in (OP_ON, OP_OFF):
            vectors = chunk_features(transition_times(events, op), cfg.chunk_size)
            rows.extend((fv, f"{actuator}:{op}") for fv in vectors)
            print(f"    {actuator:<8} {op:<4} {len(vectors)} fingerprints")
    path = _out(cfg, "fingerprints.csv")
    export_fingerprints(path, rows)
    print(f"[✓] {len(rows)} fingerprints written to {path}")
    return 0


def handle_train(cfg: RunConfig, args: argparse.Namespace) -> int:
    X, labels = load_fingerprints(args.fingerprints)
    print(f"[*] Training {cfg.kernel} SVM on {X.shape[0]} fingerprints, {len(set(labels))} classes")
    model = train(X, labels, kernel=cfg.kernel, epochs=cfg.epochs, lam=cfg.lam, seed=cfg.seed)
    path = _out(cfg, "svm.json")
    save_svm(path, model)
    print(f"[✓] Training accuracy {accuracy(model, X, labels):.2%}; model written to {path}")
    return 0


def handle_classify(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Score a trained model, cross-validate a fingerprint file, or run the bench studies."""
    if args.fingerprints and args.model:
        X, labels = load_fingerprints(args.fingerprints)
        model = load_svm(args.model)
        predicted = predict_many(model, X)
        hits = sum(p == t for p, t in zip(predicted, labels))
        print(f"[✓] {hits}/{len(labels)} fingerprints classified correctly ({hits / len(labels):.2%})")
        return 0

    if args.fingerprints:
        X, labels = load_fingerprints(args.fingerprints)
        table = {"Accuracy": cross_validate(X, labels, folds=cfg.folds, kernels=KERNELS, epochs=cfg.epochs,
                                            lam=cfg.lam, seed=cfg.seed, workers=cfg.workers)}
        reporting.write_accuracy_table(_out(cfg, "accuracy.csv"), table)
        for line in reporting.format_accuracy_table(table):
            print(line)
        return 0

    print("[*] Running the bench classification studies")
    result = engine.classification_study(cfg)
    five = engine.five_valve_study(cfg)
    engine.write_classification(cfg, result, five)
    dump_config(cfg, cfg.out_dir)
    for title, lines in engine.summary_sections(classification=result, five=five).items():
        print("\n".join(reporting.banner(title) + lines))
    return 0


# ============================================================================
# Attacks and detection
# ============================================================================
def handle_attack(cfg: RunConfig, args: argparse.Namespace) -> int:
    scenario = engine.resolve_scenario(cfg)
    if args.replay:
        recorded = _ingest(args.replay, scenario)
        live = _ingest(args.data, scenario)
        windows = _parse_windows(args.window, len(live))
        replayed = replay_attack(recorded, live, windows)
        export_csv(replayed, _out(cfg, "replayed.csv"))
        print(f"[✓] Replayed {len(windows)} window(s) into {_out(cfg, 'replayed.csv')}")
        return 0

    types = args.types or list(ATTACK_TYPES)
    attacks, duration_s = scripted_campaign(cfg.attacks_per_type, cfg.seed, scenario.sample_period_s, types=types)
    print(f"[*] Campaign: {len(attacks)} attacks ({', '.join(types)}) over {duration_s:.0f} s")
    ds, truth = simulate(engine.with_attacks(scenario, attacks), duration_s, cfg.seed)
    export_csv(ds, _out(cfg, "attacked.csv"))
    save_ground_truth(truth, _out(cfg, "attacked_truth.json"))
    dump_config(cfg, cfg.out_dir)
    performed = sum(a.performed for a in truth.attacks)
    print(f"[✓] {performed}/{len(truth.attacks)} attacks performed; trace written to {_out(cfg, 'attacked.csv')}")
    return 0


def handle_detect(cfg: RunConfig, args: argparse.Namespace) -> int:
    scenario = engine.resolve_scenario(cfg)
    ds = _ingest(args.data, scenario)

    if args.fit:
        params = fit_detector(ds, engine.tracked_pairs(scenario), cfg.timeout_s, cfg.max_far)
        path = _out(cfg, "cusum_params.json")
        save_detector(params, path)
        far = far_table(run_detector(ds, params))
        reporting.write_far_table(_out(cfg, "false_alarms.csv"), far)
        for (actuator, op), rate in sorted(far.items()):
            print(f"    {actuator:<8} {op:<4} false alarm rate {rate:.2%}")
        print(f"[✓] CUSUM parameters written to {path}")
        return 0

    params = load_detector(args.params)
    log = run_detector(ds, params, cfg.timeout_s)
    export_alarms(log, _out(cfg, "alarms.csv"))
    print(f"[*] {len(log)} alarms written to {_out(cfg, 'alarms.csv')}")
    if args.truth:
        rows = detection_report(log, load_ground_truth(args.truth))
        reporting.write_detection_table(_out(cfg, "detection.csv"), rows)
        reporting.write_text_report(_out(cfg, "detection.txt"), {"ATTACK DETECTION": reporting.format_detection_table(rows)}, cfg)
        print("\n".join(reporting.format_detection_table(rows)))
    dump_config(cfg, cfg.out_dir)
    return 0


# ============================================================================
# Watermark and full report
# ============================================================================
def handle_watermark_eval(cfg: RunConfig, args: argparse.Namespace) -> int:
    print(f"[*] Evaluating watermark delays on [{cfg.delay_min_s:g}, {cfg.delay_max_s:g}] s")
    result = engine.watermark_study(cfg)
    paths = engine.write_watermark(cfg, result)
    sections = engine.summary_sections(watermark=result)
    reporting.write_text_report(_out(cfg, "watermark.txt"), sections, cfg)
    dump_config(cfg, cfg.out_dir)
    for title, lines in sections.items():
        print("\n".join(reporting.banner(title) + lines))
    print(f"[✓] {len(paths) + 1} watermark reports written to {cfg.out_dir}")
    return 0


def handle_report(cfg: RunConfig, args: argparse.Namespace) -> int:
    paths = engine.run_pipeline(cfg)
    print(f"[✓] Report bundle: {len(paths)} files under {os.path.abspath(cfg.out_dir)}")
    with open(paths["summary"], "r", encoding="utf-8") as f:
        print(f.read())
    return 0


__all__ = [
    "handle_simulate",
    "handle_identify",
    "handle_fingerprint",
    "handle_train",
    "handle_classify",
    "handle_attack",
    "handle_detect",
    "handle_watermark_eval",
    "handle_report",
]
