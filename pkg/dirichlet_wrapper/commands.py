# commands.py

"""
Subcommand Handlers

One handler per ``dw`` subcommand. Each takes the parsed arguments and the
merged configuration, reads and writes the documented file formats, prints a
short status to the console and returns the process exit code. Failures are
raised as DirichletWrapperError subclasses and turned into exit code 1 by main.

Functions:
    - cmd_synth: Generate the synthetic shift scenario.
    - cmd_bb_train: Train the simulated black-box.
    - cmd_bb_predict: Query a black-box for a dataset.
    - cmd_wrap_train: Train the uncertainty wrapper.
    - cmd_score: Compute uncertainty scores.
    - cmd_reject: Sweep the rejection curve of one scores file.
    - cmd_report: Write curves CSV, SVG panels and the summary table.
    - cmd_gradcheck: Finite-difference check of the wrapper-loss gradient.
"""

import argparse
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import asciichartpy
import numpy as np
import yaml
from loguru import logger

from dirichlet_wrapper.blackbox import (
    BlackBoxTrainConfig,
    RemoteBlackBox,
    accuracy,
    batch_predict,
    load_predictions,
    load_simulated_blackbox,
    save_predictions,
    save_simulated_blackbox,
    train_simulated_blackbox,
)
from dirichlet_wrapper.console_manager import console_proxy
from dirichlet_wrapper.corpus import (
    Example,
    ShiftScenario,
    featurize_examples,
    generate_shift_scenario,
    load_dataset,
    load_embedding_table,
    save_dataset,
)
from dirichlet_wrapper.errors import ConfigError, PredictionLookupError
from dirichlet_wrapper.rejection import DEFAULT_FRACTIONS, sweep_curve, write_curve_csv
from dirichlet_wrapper.report import (
    CurveBundle,
    ascii_panel,
    render_curves_svg,
    summary_table,
    write_curves_csv,
)
from dirichlet_wrapper.uncertainty import (
    BASELINE_ENTROPY,
    baseline_entropy,
    load_scores_csv,
    resolve_method,
    score_dataset,
    write_scores_csv,
)
from dirichlet_wrapper.utils import create_output_directory
from dirichlet_wrapper.wrapper import (
    EnrichedPrediction,
    TrainConfig,
    WrapperDataset,
    enrich_batch,
    gradient_check,
    init_wrapper,
    load_wrapper,
    save_wrapper,
    train_wrapper,
    training_noise,
    write_loss_trace,
)

Config = Dict[str, Any]


def _output_path(args: argparse.Namespace, config: Config, default_name: str) -> Path:
    """``--out`` when given, else ``default_name`` inside the output directory."""
    explicit = getattr(args, "out", None)
    if explicit:
        path = Path(explicit)
        create_output_directory(path.parent)
        return path
    return create_output_directory(config["output_dir"]) / default_name


def _features(examples: Sequence[Example], args: argparse.Namespace) -> np.ndarray:
    table = load_embedding_table(args.embeddings) if getattr(args, "embeddings", None) else None
    return featurize_examples(examples, table, args.bow_dim)


def _prediction_map(path: str) -> Dict[str, np.ndarray]:
    return {record.example_id: record.array for record in load_predictions(path)}


def _wrapper_dataset(examples: Sequence[Example], args: argparse.Namespace) -> WrapperDataset:
    return WrapperDataset.from_records(
        [e.example_id for e in examples],
        _features(examples, args),
        [e.label for e in examples],
        _prediction_map(args.preds),
    )


def cmd_synth(args: argparse.Namespace, config: Config) -> int:
    """
    Writes the six source/target split files and ``manifest.yaml``.

    Returns:
        int: 0 on success.
    """
    scenario = ShiftScenario(**config["scenario"], seed=config["seed"])
    source, target = generate_shift_scenario(scenario)
    out_dir = create_output_directory(config["output_dir"])

    files = {}
    for domain, splits in (("source", source), ("target", target)):
        for split, examples in splits.items():
            name = f"{domain}_{split}.jsonl"
            save_dataset(examples, out_dir / name)
            files[name] = len(examples)

    manifest = {"scenario": scenario.to_dict(), "files": files}
    manifest_path = out_dir / "manifest.yaml"
    try:
        with manifest_path.open("w", encoding="utf-8") as f:
            yaml.safe_dump(manifest, f, sort_keys=False)
    except OSError as e:
        raise ConfigError(f"Failed to write manifest '{manifest_path}': {e}") from e
    logger.info(f"Scenario manifest written to '{manifest_path}'.")

    console_proxy.console.print(
        f"[bold green]Wrote {len(files)} dataset files and manifest.yaml to '{out_dir}'.[/bold green]"
    )
    return 0


def cmd_bb_train(args: argparse.Namespace, config: Config) -> int:
    """Trains the simulated black-box and saves it as network JSON."""
    settings = config["blackbox"]
    train = load_dataset(args.data)
    features = _features(train, args)
    labels = [e.label for e in train]
    validation = None
    if args.validation:
        held_out = load_dataset(args.validation)
        validation = (_features(held_out, args), [e.label for e in held_out])

    source, report = train_simulated_blackbox(
        features,
        labels,
        BlackBoxTrainConfig(
            hidden=tuple(settings["hidden"]),
            epochs=settings["epochs"],
            batch_size=settings["batch_size"],
            lr=settings["lr"],
            seed=config["seed"],
        ),
        validation=validation,
    )
    path = save_simulated_blackbox(source, _output_path(args, config, "blackbox.json"))

    console_proxy.console.print(f"Train accuracy: [bold]{report.train_accuracy:.4f}[/bold]")
    if report.validation_accuracy is not None:
        console_proxy.console.print(f"Validation accuracy: [bold]{report.validation_accuracy:.4f}[/bold]")
    console_proxy.console.print(f"[bold green]Black-box saved to '{path}'.[/bold green]")
    return 0


def cmd_bb_predict(args: argparse.Namespace, config: Config) -> int:
    """Writes one prediction per dataset example and prints accuracy and mean baseline entropy."""
    examples = load_dataset(args.data)
    features = _features(examples, args)
    if args.model:
        source = load_simulated_blackbox(args.model)
    else:
        remote = config["remote"]
        source = RemoteBlackBox(
            args.endpoint,
            timeout=remote["timeout"],
            batch_size=remote["batch_size"],
            max_workers=remote["max_workers"],
            retries=remote["retries"],
        )

    records = batch_predict(source, [e.example_id for e in examples], features)
    path = save_predictions(records, _output_path(args, config, "predictions.jsonl"))

    if records:
        probs = np.stack([r.array for r in records])
        acc = accuracy(probs, [e.label for e in examples])
        mean_entropy = float(np.mean([baseline_entropy(p) for p in probs]))
        logger.info(f"Black-box accuracy on '{args.data}': {acc:.4f}; mean entropy {mean_entropy:.4f}.")
        console_proxy.console.print(f"Accuracy: [bold]{acc:.4f}[/bold]")
        console_proxy.console.print(f"Mean baseline entropy: [bold]{mean_entropy:.4f}[/bold]")
    console_proxy.console.print(f"[bold green]{len(records)} predictions saved to '{path}'.[/bold green]")
    return 0


def cmd_wrap_train(args: argparse.Namespace, config: Config) -> int:
    """Trains the wrapper; writes its JSON and the ``<stem>_loss.csv`` trace next to it."""
    settings = config["wrapper"]
    train_config = TrainConfig(
        epochs=settings["epochs"],
        batch_size=settings["batch_size"],
        lr=settings["lr"],
        m_train=settings["samples"],
        lam=settings["lambda"],
        seed=config["seed"],
    )
    console_proxy.console.print(
        f"Training wrapper: epochs={train_config.epochs}, lr={train_config.lr}, "
        f"batch={train_config.batch_size}, M={train_config.m_train}, lambda={train_config.lam}, "
        f"seed={train_config.seed}"
    )
    dataset = _wrapper_dataset(load_dataset(args.data), args)
    model, trace = train_wrapper(
        dataset,
        train_config,
        hidden=settings["hidden"],
        beta_min=settings["beta_min"],
        epsilon_clip=settings["epsilon_clip"],
    )

    path = save_wrapper(model, _output_path(args, config, "wrapper.json"))
    trace_path = write_loss_trace(trace, path.with_name(f"{path.stem}_loss.csv"))

    if len(trace) > 1:
        console_proxy.console.print(asciichartpy.plot(trace, {"height": 8, "format": "{:>9.4f}"}))
    console_proxy.console.print(f"[bold green]Wrapper saved to '{path}', loss trace to '{trace_path}'.[/bold green]")
    return 0


def cmd_score(args: argparse.Namespace, config: Config) -> int:
    """
    Scores every example of ``--data``.

    The baseline needs only the black-box predictions; the sampling methods
    also need ``--wrapper``.

    Raises:
        ConfigError: If a sampling method is requested without a wrapper file.
    """
    method = resolve_method(args.method)
    examples = load_dataset(args.data)
    ids = [e.example_id for e in examples]

    if method == BASELINE_ENTROPY:
        predictions = _prediction_map(args.preds)
        missing = [eid for eid in ids if eid not in predictions]
        if missing:
            raise PredictionLookupError(
                f"no black-box prediction for {len(missing)} examples (first: '{missing[0]}')"
            )
        enriched: List[EnrichedPrediction] = [
            EnrichedPrediction.unenriched(eid, predictions[eid]) for eid in ids
        ]
    else:
        if not args.wrapper:
            raise ConfigError(f"--method {args.method} needs a trained wrapper (--wrapper PATH)")
        model = load_wrapper(args.wrapper)
        dataset = _wrapper_dataset(examples, args)
        enriched = enrich_batch(model, dataset.features, dataset.probs, dataset.example_ids)

    m = config["scoring"]["samples"]
    scores = score_dataset(enriched, method, m, config["seed"])
    path = write_scores_csv(
        scores,
        enriched,
        {e.example_id: e.label for e in examples},
        _output_path(args, config, f"scores_{method}.csv"),
    )
    console_proxy.console.print(
        f"[bold green]{len(scores)} {method} scores written to '{path}'.[/bold green]"
    )
    return 0


def _scored_pairs(path: str) -> Tuple[str, List[Tuple[float, bool]]]:
    """(method, [(score, correct)]) from a scores CSV, in example-id order."""
    frame = load_scores_csv(path)
    methods = frame["method"].unique()
    if len(methods) != 1:
        raise ConfigError(f"scores file '{path}' must hold exactly one method, found {list(methods)}")
    if frame["correct"].isna().any():
        raise ConfigError(f"scores file '{path}' has examples without a true label; rejection needs labels")
    frame = frame.sort_values("example_id", kind="stable")
    pairs = list(zip(frame["score"].astype(float), frame["correct"].astype(int).astype(bool)))
    return str(methods[0]), pairs


def cmd_reject(args: argparse.Namespace, config: Config) -> int:
    """Sweeps the reject fractions over one scores file and writes the curve CSV."""
    method, pairs = _scored_pairs(args.scores)
    curve = sweep_curve(pairs, args.fractions or DEFAULT_FRACTIONS)
    path = write_curve_csv(curve, _output_path(args, config, f"curve_{method}.csv"))

    base = curve[0]
    console_proxy.console.print(
        f"{method}: NRA {base.nra * 100:.2f}% at {base.rejected_fraction:.0%} rejection, "
        f"{curve[-1].nra * 100:.2f}% at {curve[-1].rejected_fraction:.0%}"
    )
    console_proxy.console.print(f"[bold green]Rejection curve written to '{path}'.[/bold green]")
    return 0


def cmd_report(args: argparse.Namespace, config: Config) -> int:
    """
    Writes ``curves.csv``, ``nra.svg``, ``cq.svg``, ``rq.svg`` and ``summary.txt``.

    Raises:
        ConfigError: If two score files carry the same method.
    """
    fractions = args.fractions or DEFAULT_FRACTIONS
    curves = {}
    for path in args.scores:
        method, pairs = _scored_pairs(path)
        if method in curves:
            raise ConfigError(f"method '{method}' appears in more than one scores file")
        curves[method] = sweep_curve(pairs, fractions)
    bundle = CurveBundle(curves=curves, dataset_label=args.label)

    out_dir = create_output_directory(config["output_dir"])
    write_curves_csv(bundle, out_dir / "curves.csv")
    for panel in ("nra", "cq", "rq"):
        render_curves_svg(bundle, panel, out_dir / f"{panel}.svg")
    table = summary_table(bundle, config["scoring"]["table_fractions"])
    summary_path = out_dir / "summary.txt"
    try:
        summary_path.write_text(table, encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Failed to write summary '{summary_path}': {e}") from e
    logger.info(f"Report for {len(curves)} methods written to '{out_dir}'.")

    console_proxy.console.print(table)
    console_proxy.console.print(ascii_panel(bundle, "nra"))
    console_proxy.console.print(f"[bold green]Report written to '{out_dir}'.[/bold green]")
    return 0


def cmd_gradcheck(args: argparse.Namespace, config: Config) -> int:
    """
    Compares the wrapper-loss gradient with finite differences on a few examples.

    Returns:
        int: 0 when the maximum relative error is within ``--tolerance``, else 1.
    """
    if args.examples < 1:
        raise ConfigError(f"--examples must be >= 1, got {args.examples}")
    dataset = _wrapper_dataset(load_dataset(args.data), args)
    batch = dataset.subset(np.arange(min(args.examples, len(dataset))))
    m = config["wrapper"]["samples"]
    seed = config["seed"]

    if args.wrapper:
        model = load_wrapper(args.wrapper)
    else:
        settings = config["wrapper"]
        model = init_wrapper(
            batch.features.shape[1],
            TrainConfig(m_train=m, lam=settings["lambda"], seed=seed),
            hidden=settings["hidden"],
            beta_min=settings["beta_min"],
            epsilon_clip=settings["epsilon_clip"],
        )
    noise = training_noise(seed, 0, batch.example_ids, m, batch.num_classes)
    result = gradient_check(model, batch, noise, max_parameters=args.max_params, seed=seed)

    passed = result["max_rel_error"] <= args.tolerance
    style = "bold green" if passed else "bold red"
    console_proxy.console.print(
        f"[{style}]Max relative error {result['max_rel_error']:.3e} over {int(result['checked'])} parameters "
        f"(tolerance {args.tolerance:g}).[/{style}]"
    )
    return 0 if passed else 1


COMMANDS: Dict[str, Callable[[argparse.Namespace, Config], int]] = {
    "synth": cmd_synth,
    "bb-train": cmd_bb_train,
    "bb-predict": cmd_bb_predict,
    "wrap-train": cmd_wrap_train,
    "score": cmd_score,
    "reject": cmd_reject,
    "report": cmd_report,
    "gradcheck": cmd_gradcheck,
}


def run_command(args: argparse.Namespace, config: Config) -> int:
    """Dispatches to the handler of ``args.command``."""
    handler: Optional[Callable[[argparse.Namespace, Config], int]] = COMMANDS.get(args.command)
    if handler is None:
        raise ConfigError(f"unknown command '{args.command}'")
    logger.info(f"Running '{args.command}' with seed {config['seed']}.")
    return handler(args, config)
