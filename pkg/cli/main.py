import argparse
import os
import sys

from cli.handlers import (
    handle_attack,
    handle_classify,
    handle_detect,
    handle_fingerprint,
    handle_identify,
    handle_report,
    handle_simulate,
    handle_train,
    handle_watermark_eval,
)
from tcfinger.classify import KERNELS
from tcfinger.config.config_utils import load_config
from tcfinger.errors import TcError
from tcfinger.plantsim.scenario import ATTACK_TYPES

COMMANDS = {
    "simulate": handle_simulate,
    "identify": handle_identify,
    "fingerprint": handle_fingerprint,
    "train": handle_train,
    "classify": handle_classify,
    "attack": handle_attack,
    "detect": handle_detect,
    "watermark-eval": handle_watermark_eval,
    "report": handle_report,
}

# RunConfig fields that may be set from the command line
OVERRIDES = ("seed", "out_dir", "scenario", "workers", "duration_s", "kernel", "folds", "chunk_size",
             "timeout_s", "alpha", "max_far", "attacks_per_type", "operations_per_device")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="CONFIG_PATH", help="Run configuration JSON")
    common.add_argument("--seed", type=int, help="Root seed of every random draw")
    common.add_argument("--out", dest="out_dir", metavar="DIR", help="Output directory (default: out)")
    common.add_argument("--scenario", metavar="SCENARIO_PATH", help="Scenario JSON (default: bundled two-stage plant)")
    common.add_argument("--workers", type=int, help="Process pool size for folds and Monte-Carlo trials")
    return common


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog="tcfinger",
        description="tcfinger - Time-Constant actuator fingerprinting, attack detection and watermarking",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s simulate --seed 7 --duration 3600          # Plant trace + ground truth
  %(prog)s simulate --dump-scenario plant.json         # Write the bundled scenario
  %(prog)s identify --data out/dataset.csv             # State-space model of the trace
  %(prog)s fingerprint --data out/dataset.csv          # Chunked Time-Constant fingerprints
  %(prog)s train --fingerprints out/fingerprints.csv --kernel linear
  %(prog)s classify                                    # Bench classification studies
  %(prog)s attack --types C1 D2 --per-type 5           # Scripted attack campaign
  %(prog)s detect --fit --data out/dataset.csv         # Fit CUSUM parameters
  %(prog)s detect --params out/cusum_params.json --data out/attacked.csv --truth out/attacked_truth.json
  %(prog)s watermark-eval                              # Replay power, entropy, randomness
  %(prog)s report --config tcfinger/config.json        # Every study and the full report
        """,
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    common = _common_options()

    simulate = sub.add_parser("simulate", parents=[common], help="Simulate the plant")
    simulate.add_argument("--duration", dest="duration_s", type=float, help="Simulated seconds")
    simulate.add_argument("--watermark", action="store_true", help="Delay PLC commands by random watermark draws")
    simulate.add_argument("--dump-scenario", metavar="PATH", help="Write the resolved scenario JSON and exit")

    identify = sub.add_parser("identify", parents=[common], help="Identify a state-space model from a trace")
    identify.add_argument("--data", required=True, metavar="CSV", help="Dataset CSV")
    identify.add_argument("--inputs", nargs="+", metavar="CHANNEL", help="Input channels (default: all actuators)")
    identify.add_argument("--outputs", nargs="+", metavar="CHANNEL", help="Output channels (default: all level sensors)")
    identify.add_argument("--order", type=int, help="Model order")

    fingerprint = sub.add_parser("fingerprint", parents=[common], help="Extract Time-Constant fingerprints")
    fingerprint.add_argument("--data", required=True, metavar="CSV", help="Dataset CSV")
    fingerprint.add_argument("--pairs", nargs="+", metavar="ACTUATOR:SENSOR", help="Pairings (default: the scenario's)")
    fingerprint.add_argument("--chunk-size", dest="chunk_size", type=int, help="Transition times per chunk")
    fingerprint.add_argument("--timeout", dest="timeout_s", type=float, help="Transition timeout (s)")

    train = sub.add_parser("train", parents=[common], help="Train an SVM on a fingerprint CSV")
    train.add_argument("--fingerprints", required=True, metavar="CSV", help="Fingerprint CSV")
    train.add_argument("--kernel", choices=KERNELS, help="Kernel")

    classify = sub.add_parser("classify", parents=[common], help="Cross-validate or apply classifiers")
    classify.add_argument("--fingerprints", metavar="CSV", help="Fingerprint CSV (default: run the bench studies)")
    classify.add_argument("--model", metavar="JSON", help="Trained SVM to score the fingerprints with")
    classify.add_argument("--folds", type=int, help="Cross-validation folds")
    classify.add_argument("--operations", dest="operations_per_device", type=int, help="Bench operations per device")

    attack = sub.add_parser("attack", parents=[common], help="Simulate a scripted attack campaign or a replay")
    attack.add_argument("--types", nargs="+", choices=ATTACK_TYPES, help="Attack types (default: all)")
    attack.add_argument("--per-type", dest="attacks_per_type", type=int, help="Instances of every type")
    attack.add_argument("--replay", metavar="RECORDED_CSV", help="Recorded trace to replay over --data")
    attack.add_argument("--data", metavar="CSV", help="Live trace receiving the replay")
    attack.add_argument("--window", nargs="+", metavar="START:END", help="Replay windows as sample indices")

    detect = sub.add_parser("detect", parents=[common], help="Fit or run the CUSUM detector")
    detect.add_argument("--data", required=True, metavar="CSV", help="Dataset CSV")
    detect.add_argument("--fit", action="store_true", help="Fit CUSUM parameters on attack-free data")
    detect.add_argument("--params", metavar="JSON", help="CUSUM parameters from detect --fit")
    detect.add_argument("--truth", metavar="JSON", help="Ground truth for the detection table")
    detect.add_argument("--timeout", dest="timeout_s", type=float, help="Transition timeout (s)")
    detect.add_argument("--max-far", dest="max_far", type=float, help="False alarm budget per direction")

    watermark = sub.add_parser("watermark-eval", parents=[common], help="Replay power, entropy and randomness of the watermark")
    watermark.add_argument("--alpha", type=float, help="K-S significance level")

    sub.add_parser("report", parents=[common], help="Run every study and write the report bundle")
    return parser


def _require_file(parser: argparse.ArgumentParser, path, flag: str) -> None:
    if path is not None and not os.path.isfile(path):
        parser.error(f"{flag}: file '{path}' does not exist")


def validate_args(args: argparse.Namespace, parser: argparse.ArgumentParser) -> bool:
    """Validate argument combinations."""
    if args.command is None:
        parser.error(f"a command is required: one of {', '.join(COMMANDS)}")
        return False

    _require_file(parser, args.config, "--config")
    _require_file(parser, args.scenario, "--scenario")
    for flag in ("data", "fingerprints", "model", "params", "truth", "replay"):
        _require_file(parser, getattr(args, flag, None), f"--{flag}")

    if args.command == "detect" and not (args.fit or args.params):
        parser.error("detect requires --params (CUSUM parameters from 'detect --fit') or --fit")
        return False

    if args.command == "detect" and args.fit and args.params:
        parser.error("--fit and --params cannot be used together")
        return False

    if args.command == "classify" and args.model and not args.fingerprints:
        parser.error("--model requires --fingerprints")
        return False

    if args.command == "attack" and (args.replay is None) != (args.data is None):
        parser.error("--replay and --data must be given together")
        return False

    if args.command == "attack" and args.window and not args.replay:
        parser.error("--window can only be used with --replay")
        return False

    return True


def run_command(args: argparse.Namespace) -> int:
    """Execute the appropriate command based on parsed arguments."""
    overrides = {name: getattr(args, name, None) for name in OVERRIDES}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except TcError as e:
        print(f"[!] {type(e).__name__}: {e}")
        return 1


def main(argv=None):
    parser = create_parser()
    args = parser.parse_args(argv)
    validate_args(args, parser)

    exit_code = 0
    try:
        exit_code = run_command(args)
    except KeyboardInterrupt:
        print("\nInterrupted by user.")
        exit_code = 130

    sys.exit(exit_code)


if __name__ == "__main__":
    main()
