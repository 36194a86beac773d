# tests/test_pipeline.py

"""
End-to-end runs on the default synthetic scenario. Slow: run with ``pytest -m slow``.
"""

from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from dirichlet_wrapper.blackbox import accuracy, load_predictions
from dirichlet_wrapper.console_manager import console_proxy
from dirichlet_wrapper.corpus import load_dataset
from dirichlet_wrapper.logger import reset_logging
from dirichlet_wrapper.main import main
from dirichlet_wrapper.rejection import load_curve_csv

pytestmark = pytest.mark.slow

SCORE_FILES = ("baseline_entropy", "sampled_entropy", "variation_ratio")


def _dw(out, *argv):
    previous = console_proxy.console
    try:
        return main(["-q", "--out-dir", str(out), *argv])
    finally:
        console_proxy.set_console(previous)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    """
    Runs the whole default pipeline once for the module.

    Module fixtures start before the per-test directory isolation, so the user
    directories are redirected here as well.
    """
    out = tmp_path_factory.mktemp("pipeline")
    home = tmp_path_factory.mktemp("user")
    dirs = MagicMock(
        user_config_dir=str(home / "config"), user_data_dir=str(home / "data"), user_log_dir=str(home / "logs")
    )
    with patch("dirichlet_wrapper.config.AppDirs", return_value=dirs), pytest.MonkeyPatch.context() as mp:
        mp.delenv("DW_SEED", raising=False)
        steps = [
            ["synth"],
            ["bb-train", "--data", str(out / "source_train.jsonl"), "--validation", str(out / "source_validation.jsonl")],
        ]
        for domain in ("source", "target"):
            for split in ("train", "test"):
                steps.append(
                    [
                        "bb-predict",
                        "--data",
                        str(out / f"{domain}_{split}.jsonl"),
                        "--model",
                        str(out / "blackbox.json"),
                        "--out",
                        str(out / f"preds_{domain}_{split}.jsonl"),
                    ]
                )
        steps.append(["wrap-train", "--data", str(out / "target_train.jsonl"), "--preds", str(out / "preds_target_train.jsonl")])
        for method in ("baseline-entropy", "sampled-entropy", "var-ratios"):
            steps.append(
                [
                    "score",
                    "--data",
                    str(out / "target_test.jsonl"),
                    "--preds",
                    str(out / "preds_target_test.jsonl"),
                    "--wrapper",
                    str(out / "wrapper.json"),
                    "--method",
                    method,
                ]
            )
        steps += [["reject", "--scores", str(out / f"scores_{name}.csv")] for name in SCORE_FILES]
        steps.append(["report", "--scores", *(str(out / f"scores_{name}.csv") for name in SCORE_FILES)])

        for argv in steps:
            assert _dw(out, *argv) == 0, argv
    reset_logging()
    return out


def _accuracy(out, domain):
    examples = load_dataset(out / f"{domain}_test.jsonl")
    predictions = {r.example_id: r.array for r in load_predictions(out / f"preds_{domain}_test.jsonl")}
    return accuracy(np.stack([predictions[e.example_id] for e in examples]), [e.label for e in examples])


def _nra(out, method, fraction):
    curve = load_curve_csv(out / f"curve_{method}.csv")
    return next(p.nra for p in curve if p.rejected_fraction == pytest.approx(fraction))


def test_shift_degrades_blackbox(run_dir):
    """
    Test that the black-box loses at least 5 accuracy points on the shifted target.
    """
    assert _accuracy(run_dir, "target") <= _accuracy(run_dir, "source") - 0.05


def test_sampled_entropy_rejection_improves_accuracy(run_dir):
    """
    Test that rejecting 10% by sampled entropy raises target accuracy by at least 3 points.
    """
    assert _nra(run_dir, "sampled_entropy", 0.1) >= _nra(run_dir, "sampled_entropy", 0.0) + 0.03


@pytest.mark.parametrize("fraction", [0.1, 0.2])
def test_sampled_entropy_not_worse_than_baseline(run_dir, fraction):
    """
    Test that the wrapper's ranking is at least as good as the black-box entropy.
    """
    assert _nra(run_dir, "sampled_entropy", fraction) >= _nra(run_dir, "baseline_entropy", fraction)


def test_rejection_accuracy_starts_at_blackbox_accuracy(run_dir):
    """
    Test that NRA at 0% equals the plain black-box accuracy for every method.
    """
    target = _accuracy(run_dir, "target")
    for method in SCORE_FILES:
        assert _nra(run_dir, method, 0.0) == pytest.approx(target)


def test_report_written(run_dir):
    for name in ("curves.csv", "nra.svg", "cq.svg", "rq.svg", "summary.txt"):
        assert (run_dir / name).stat().st_size > 0
    summary = (run_dir / "summary.txt").read_text(encoding="utf-8")
    assert all(name in summary for name in SCORE_FILES)


def test_pipeline_deterministic(run_dir, tmp_path):
    """
    Test that rerunning wrapper training and scoring with the same seed reproduces the files byte for byte.
    """
    out = run_dir
    assert (
        _dw(tmp_path, "wrap-train", "--data", str(out / "target_train.jsonl"), "--preds", str(out / "preds_target_train.jsonl"))
        == 0
    )
    assert (
        _dw(
            tmp_path,
            "score",
            "--data",
            str(out / "target_test.jsonl"),
            "--preds",
            str(out / "preds_target_test.jsonl"),
            "--wrapper",
            str(tmp_path / "wrapper.json"),
            "--method",
            "sampled-entropy",
        )
        == 0
    )
    for name in ("wrapper.json", "wrapper_loss.csv", "scores_sampled_entropy.csv"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes(), name
