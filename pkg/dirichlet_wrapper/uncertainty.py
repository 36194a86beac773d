# uncertainty.py

"""
Uncertainty Scores

Turns black-box outputs and their Dirichlet enrichment into one scalar
uncertainty score per prediction: the entropy of the black-box output itself,
the entropy of the Monte Carlo mean of Dirichlet samples, or the variation
ratio of the sampled argmax classes. All logarithms are natural.

Functions:
    - baseline_entropy: Predictive entropy of the black-box output.
    - sampled_entropy: Entropy of the Monte Carlo mean of M Dirichlet samples.
    - variation_ratio: 1 - (modal argmax count) / M over M Dirichlet samples.
    - score_dataset: Scores a sequence of predictions with one method.
    - write_scores_csv / load_scores_csv: Scores CSV files.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.special import entr

from dirichlet_wrapper.errors import ConfigError, ShapeError
from dirichlet_wrapper.numerics import (
    UniformNoiseBlock,
    check_probability_vector,
    dirichlet_sample,
    dirichlet_sample_batch,
    stream_id_for,
    uniform_noise,
)
from dirichlet_wrapper.utils import argmax_lowest
from dirichlet_wrapper.wrapper import EnrichedPrediction

BASELINE_ENTROPY = "baseline_entropy"
SAMPLED_ENTROPY = "sampled_entropy"
VARIATION_RATIO = "variation_ratio"
METHODS = (BASELINE_ENTROPY, SAMPLED_ENTROPY, VARIATION_RATIO)

# command-line spellings of the method tags
METHOD_NAMES = {
    "baseline-entropy": BASELINE_ENTROPY,
    "sampled-entropy": SAMPLED_ENTROPY,
    "var-ratios": VARIATION_RATIO,
}

SCORES_COLUMNS = ["example_id", "method", "M", "score", "bb_argmax", "true_label", "correct"]


@dataclass(frozen=True)
class UncertaintyScore:
    """
    One uncertainty score.

    Attributes:
        example_id (str): Id of the scored example.
        method (str): One of baseline_entropy, sampled_entropy, variation_ratio.
        value (float): The score; higher means more uncertain.
        m_used (int): Monte Carlo samples used (0 for the baseline).
    """

    example_id: str
    method: str
    value: float
    m_used: int


def resolve_method(name: str) -> str:
    """
    Maps a command-line or internal method name to its tag.

    Raises:
        ConfigError: If the name is unknown.
    """
    if name in METHODS:
        return name
    if name in METHOD_NAMES:
        return METHOD_NAMES[name]
    raise ConfigError(
        f"unknown uncertainty method '{name}' (choose from {', '.join(METHOD_NAMES)})"
    )


def _entropy(p: np.ndarray) -> np.ndarray:
    # entr(p) = -p ln p with entr(0) = 0
    return entr(p).sum(axis=-1)


def baseline_entropy(y: Sequence[float]) -> float:
    """
    Predictive entropy -sum_c y_c ln y_c of a black-box output, with 0 ln 0 = 0.

    Example:
        >>> round(baseline_entropy([0.5, 0.5]), 8)
        0.69314718
    """
    return float(_entropy(check_probability_vector(y)))


def _require_enriched(enriched: EnrichedPrediction) -> np.ndarray:
    if not enriched.is_enriched:
        raise ConfigError(
            f"prediction '{enriched.example_id}' has no Dirichlet parameters; a wrapper is required"
        )
    return enriched.alpha


def _check_samples(m: int, noise: UniformNoiseBlock) -> None:
    if m < 1:
        raise ConfigError(f"M must be >= 1, got {m}")
    if noise.samples != m:
        raise ShapeError(f"noise block has {noise.samples} rows, expected M={m}")


def sampled_entropy(enriched: EnrichedPrediction, m: int, noise: UniformNoiseBlock) -> float:
    """
    Entropy of the Monte Carlo mean of M samples from Dir(alpha).

    Args:
        enriched (EnrichedPrediction): Prediction carrying alpha.
        m (int): Number of samples M.
        noise (UniformNoiseBlock): M x C uniforms.

    Returns:
        float: The sampled predictive entropy.
    """
    alpha = _require_enriched(enriched)
    _check_samples(m, noise)
    return float(_entropy(dirichlet_sample(alpha, noise).mean(axis=0)))


def _variation_from_samples(samples: np.ndarray) -> np.ndarray:
    # samples (B, M, C) -> 1 - modal count / M, ties resolved to the lowest class
    b, m, c = samples.shape
    winners = argmax_lowest(samples)
    counts = np.zeros((b, c), dtype=int)
    np.add.at(counts, (np.repeat(np.arange(b), m), winners.ravel()), 1)
    return 1.0 - counts.max(axis=1) / m


def variation_ratio(enriched: EnrichedPrediction, m: int, noise: UniformNoiseBlock) -> float:
    """
    Variation ratio 1 - f/M, where f counts the modal argmax class over M samples.

    Args:
        enriched (EnrichedPrediction): Prediction carrying alpha.
        m (int): Number of samples M.
        noise (UniformNoiseBlock): M x C uniforms.

    Returns:
        float: A value in {0, 1/M, ..., (M-1)/M}.
    """
    alpha = _require_enriched(enriched)
    _check_samples(m, noise)
    samples = dirichlet_sample(alpha, noise)
    return float(_variation_from_samples(samples[None, :, :])[0])


def scoring_noise(seed: int, example_id: str, m: int, c: int) -> UniformNoiseBlock:
    """Noise block used to score one example; keyed by its id, not its position."""
    return uniform_noise(seed, stream_id_for("score", example_id), m, c)


def score_dataset(
    predictions: Sequence[EnrichedPrediction], method: str, m: int, seed: int
) -> List[UncertaintyScore]:
    """
    Scores every prediction with one method.

    Sampling methods draw each example's noise from (seed, example_id), so the
    scores do not depend on dataset order.

    Args:
        predictions (Sequence[EnrichedPrediction]): Predictions with example ids.
        method (str): Method tag or command-line method name.
        m (int): Monte Carlo samples (ignored by the baseline).
        seed (int): Run seed.

    Returns:
        List[UncertaintyScore]: One score per prediction, in input order.

    Raises:
        ConfigError: For an unknown method, M < 1, or missing Dirichlet parameters.
    """
    tag = resolve_method(method)
    if not predictions:
        return []
    ids = [
        p.example_id if p.example_id is not None else str(index)
        for index, p in enumerate(predictions)
    ]

    if tag == BASELINE_ENTROPY:
        values = _entropy(np.stack([p.y for p in predictions]))
        logger.info(f"Scored {len(predictions)} predictions with {tag}.")
        return [UncertaintyScore(eid, tag, float(v), 0) for eid, v in zip(ids, values)]

    if m < 1:
        raise ConfigError(f"M must be >= 1, got {m}")
    alphas = np.stack([_require_enriched(p) for p in predictions])
    c = alphas.shape[1]
    noise = np.stack([scoring_noise(seed, eid, m, c).u for eid in ids])
    samples = dirichlet_sample_batch(alphas, noise)
    if tag == SAMPLED_ENTROPY:
        values = _entropy(samples.mean(axis=1))
    else:
        values = _variation_from_samples(samples)
    logger.info(f"Scored {len(predictions)} predictions with {tag} (M={m}).")
    return [UncertaintyScore(eid, tag, float(v), m) for eid, v in zip(ids, values)]


def write_scores_csv(
    scores: Sequence[UncertaintyScore],
    predictions: Sequence[EnrichedPrediction],
    true_labels: Dict[str, Optional[int]],
    path: Union[str, Path],
) -> Path:
    """
    Writes the scores CSV: ``example_id,method,M,score,bb_argmax,true_label,correct``.

    ``true_label`` and ``correct`` are left empty when the label is unknown.
    """
    rows = []
    for score, prediction in zip(scores, predictions):
        bb_argmax = int(argmax_lowest(prediction.y))
        label = true_labels.get(score.example_id)
        rows.append(
            {
                "example_id": score.example_id,
                "method": score.method,
                "M": score.m_used,
                "score": score.value,
                "bb_argmax": bb_argmax,
                "true_label": "" if label is None else int(label),
                "correct": "" if label is None else int(bb_argmax == label),
            }
        )
    frame = pd.DataFrame(rows, columns=SCORES_COLUMNS)
    target = Path(path)
    try:
        frame.to_csv(target, index=False, encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Failed to write scores file '{target}': {e}") from e
    logger.info(f"Wrote {len(rows)} scores to '{target}'.")
    return target


def load_scores_csv(path: Union[str, Path]) -> pd.DataFrame:
    """
    Reads a scores CSV.

    Raises:
        ConfigError: If the file is missing or lacks a required column.
    """
    source = Path(path)
    try:
        frame = pd.read_csv(source, dtype={"example_id": str, "method": str}, float_precision="round_trip")
    except (OSError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"Failed to read scores file '{source}': {e}") from e
    missing = [c for c in SCORES_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError(f"scores file '{source}' lacks columns {missing}")
    return frame
