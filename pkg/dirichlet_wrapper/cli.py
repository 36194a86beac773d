# cli.py

"""
Command-Line Interface (CLI)

Handles parsing of command-line arguments for the Dirichlet wrapper toolkit (dw).
Each pipeline stage is a subcommand; global options (configuration file, output
directory, seed, verbosity) come before the subcommand name.

Functions:
    - build_parser: Builds the argument parser with all subcommands.
    - parse_arguments: Parses and returns command-line arguments.
"""

import argparse
from importlib.metadata import PackageNotFoundError, version
from typing import List, Optional

from dirichlet_wrapper.corpus import DEFAULT_BOW_DIM
from dirichlet_wrapper.uncertainty import METHOD_NAMES

MAX_FLIP_RATE = 0.5


def flip_rate(value: str) -> float:
    """argparse type for --flip: a float in [0, 0.5]."""
    try:
        rate = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float value: '{value}'") from None
    if not 0.0 <= rate <= MAX_FLIP_RATE:
        raise argparse.ArgumentTypeError(f"flip rate must be within [0, {MAX_FLIP_RATE}], got {rate}")
    return rate


def fraction(value: str) -> float:
    """argparse type for reject fractions: a float in [0, 1]."""
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float value: '{value}'") from None
    if not 0.0 <= number <= 1.0:
        raise argparse.ArgumentTypeError(f"fraction must be within [0, 1], got {number}")
    return number


def _add_featurization(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("Featurization (for examples without precomputed features)")
    group.add_argument(
        "--embeddings",
        type=str,
        help="Embedding table ('token v1 ... vd' per line); texts are featurized by averaging.",
    )
    group.add_argument(
        "--bow-dim",
        type=int,
        default=DEFAULT_BOW_DIM,
        help=f"Hashed bag-of-words dimension when no embedding table is given (default: {DEFAULT_BOW_DIM}).",
    )


def build_parser() -> argparse.ArgumentParser:
    """
    Builds the argument parser.

    Returns:
        argparse.ArgumentParser: Parser with the global options and every subcommand.
    """
    parser = argparse.ArgumentParser(
        prog="dw",
        description="dw: wrap a black-box classifier with a learned Dirichlet distribution and reject uncertain predictions.",
        formatter_class=argparse.RawTextHelpFormatter,
        epilog=(
            "Examples:\n"
            "  1. Generate the synthetic shift scenario and train the black-box on the source domain:\n"
            "     dw --out-dir run synth\n"
            "     dw --out-dir run bb-train --data run/source_train.jsonl --validation run/source_validation.jsonl\n\n"
            "  2. Predict the target domain and train the wrapper on it:\n"
            "     dw --out-dir run bb-predict --data run/target_train.jsonl --model run/blackbox.json\n"
            "     dw --out-dir run wrap-train --data run/target_train.jsonl --preds run/predictions.jsonl\n\n"
            "  3. Score, sweep and report:\n"
            "     dw --out-dir run score --data run/target_test.jsonl --preds run/test_predictions.jsonl --wrapper run/wrapper.json\n"
            "     dw --out-dir run report --scores run/scores_sampled_entropy.csv run/scores_baseline_entropy.csv\n"
        ),
    )

    optional = parser.add_argument_group("Global Options")
    optional.add_argument("--config", type=str, help="Path to a YAML configuration file.")
    optional.add_argument("--out-dir", type=str, help="Directory for output files (default: from config).")
    optional.add_argument(
        "--seed",
        type=int,
        help="Run seed (default: $DW_SEED, then the config value).",
    )
    optional.add_argument(
        "--regen-config",
        action="store_true",
        help="Regenerate the default config.yaml file.",
    )
    optional.add_argument("--yes", action="store_true", help="Automatically confirm prompts.")

    try:
        package_version = version("dirichlet-wrapper")
    except PackageNotFoundError:
        package_version = "unknown"
    optional.add_argument(
        "--version",
        action="version",
        version=f"dw version {package_version}",
        help="Show the application's version and exit.",
    )

    verbosity = parser.add_argument_group("Verbosity Options")
    verbosity_group = verbosity.add_mutually_exclusive_group()
    verbosity_group.add_argument(
        "-q", "--quiet", action="store_true", help="Suppress all non-critical output."
    )
    verbosity_group.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Increase output verbosity. Use -v for verbose and -vv for debug.",
    )

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")

    synth = subparsers.add_parser("synth", help="Generate the synthetic source/target shift scenario.")
    synth.add_argument("--n-source", type=int, help="Source examples (default: 2000).")
    synth.add_argument("--n-target", type=int, help="Target examples (default: 1000).")
    synth.add_argument("--dim", type=int, help="Feature dimension (default: 16).")
    synth.add_argument("--separation", type=float, help="Distance between class means (default: 4).")
    synth.add_argument("--rotation", type=float, help="Target rotation in degrees (default: 35).")
    synth.add_argument("--translation", type=float, help="Target translation along the second axis (default: 1.5).")
    synth.add_argument("--flip", type=flip_rate, help="Target label flip rate, at most 0.5 (default: 0.05).")

    bb_train = subparsers.add_parser("bb-train", help="Train the simulated black-box on source data.")
    bb_train.add_argument("--data", required=True, help="Training dataset (JSONL).")
    bb_train.add_argument("--validation", help="Validation dataset (JSONL).")
    bb_train.add_argument("--hidden", type=int, nargs="+", help="Hidden layer sizes (default: 32 32).")
    bb_train.add_argument("--epochs", type=int, help="Training epochs (default: 30).")
    bb_train.add_argument("--batch", type=int, help="Batch size (default: 32).")
    bb_train.add_argument("--lr", type=float, help="Adam learning rate (default: 0.01).")
    bb_train.add_argument("--out", help="Model file (default: <out-dir>/blackbox.json).")
    _add_featurization(bb_train)

    bb_predict = subparsers.add_parser("bb-predict", help="Query a black-box for a dataset.")
    bb_predict.add_argument("--data", required=True, help="Dataset to predict (JSONL).")
    source = bb_predict.add_mutually_exclusive_group(required=True)
    source.add_argument("--model", help="Simulated black-box model file.")
    source.add_argument("--endpoint", help="URL of a remote prediction service.")
    bb_predict.add_argument("--timeout", type=float, help="Remote request timeout in seconds (default: 10).")
    bb_predict.add_argument("--out", help="Predictions file (default: <out-dir>/predictions.jsonl).")
    _add_featurization(bb_predict)

    wrap_train = subparsers.add_parser("wrap-train", help="Train the uncertainty wrapper.")
    wrap_train.add_argument("--data", required=True, help="Labeled target-domain dataset (JSONL).")
    wrap_train.add_argument("--preds", required=True, help="Black-box predictions for the dataset (JSONL).")
    wrap_train.add_argument("--lambda", dest="lam", type=float, help="Regularization weight (default: 0.01).")
    wrap_train.add_argument("--samples", type=int, help="Monte Carlo samples per example (default: 20).")
    wrap_train.add_argument("--epochs", type=int, help="Training epochs (default: 80).")
    wrap_train.add_argument("--lr", type=float, help="Adam learning rate (default: 0.001).")
    wrap_train.add_argument("--batch", type=int, help="Batch size (default: 32).")
    wrap_train.add_argument("--out", help="Wrapper file (default: <out-dir>/wrapper.json).")
    _add_featurization(wrap_train)

    score = subparsers.add_parser("score", help="Compute uncertainty scores.")
    score.add_argument("--data", required=True, help="Dataset to score (JSONL).")
    score.add_argument("--preds", required=True, help="Black-box predictions for the dataset (JSONL).")
    score.add_argument("--wrapper", help="Wrapper file (not needed for baseline-entropy).")
    score.add_argument(
        "--method",
        choices=list(METHOD_NAMES),
        default="sampled-entropy",
        help="Uncertainty score (default: sampled-entropy).",
    )
    score.add_argument("--samples", type=int, help="Monte Carlo samples per example (default: 50).")
    score.add_argument("--out", help="Scores file (default: <out-dir>/scores_<method>.csv).")
    _add_featurization(score)

    reject = subparsers.add_parser("reject", help="Sweep the rejection curve of a scores file.")
    reject.add_argument("--scores", required=True, help="Scores CSV from 'score'.")
    reject.add_argument(
        "--fractions", type=fraction, nargs="+", help="Ascending reject fractions (default: 0 to 0.5 by 0.01)."
    )
    reject.add_argument("--out", help="Curve file (default: <out-dir>/curve_<method>.csv).")

    report = subparsers.add_parser("report", help="Write curves CSV, SVG panels and a summary table.")
    report.add_argument("--scores", required=True, nargs="+", help="Scores CSV files, one per method.")
    report.add_argument("--label", default="target", help="Dataset label used in titles (default: target).")
    report.add_argument(
        "--fractions", type=fraction, nargs="+", help="Ascending reject fractions (default: 0 to 0.5 by 0.01)."
    )

    gradcheck = subparsers.add_parser("gradcheck", help="Check wrapper-loss gradients against finite differences.")
    gradcheck.add_argument("--data", required=True, help="Labeled dataset (JSONL).")
    gradcheck.add_argument("--preds", required=True, help="Black-box predictions for the dataset (JSONL).")
    gradcheck.add_argument("--wrapper", help="Wrapper file (default: a freshly initialized wrapper).")
    gradcheck.add_argument("--examples", type=int, default=5, help="Examples in the checked batch (default: 5).")
    gradcheck.add_argument("--samples", type=int, help="Monte Carlo samples per example (default: 20).")
    gradcheck.add_argument("--max-params", type=int, help="Check a random subset of this many parameters.")
    gradcheck.add_argument("--tolerance", type=float, default=1e-3, help="Maximum relative error (default: 1e-3).")
    _add_featurization(gradcheck)

    return parser


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parses command-line arguments for the dw tool.

    Args:
        argv (Optional[List[str]], optional): Arguments to parse. Defaults to ``sys.argv[1:]``.

    Returns:
        argparse.Namespace: The parsed arguments.

    Example:
        >>> args = parse_arguments(["--seed", "3", "synth", "--flip", "0.1"])
        >>> args.command, args.flip
        ('synth', 0.1)
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None and not args.regen_config:
        parser.error("a command is required")
    return args
