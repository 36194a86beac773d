# rejection.py

"""
Rejection Evaluation

Sorts predictions from more to less uncertain, rejects a leading fraction of
them, and measures how well the rejection separated misclassified from
accurately classified points.

For a partition into Accurate/Misclassified and Non-rejected/Rejected:
    NRA = |A&N| / |N|                       (accuracy on what is kept)
    CQ  = (|A&N| + |M&R|) / n               (both decisions right)
    RQ  = (|M&R| |A|) / (|A&R| |M|)         (misclassification odds among rejected vs overall)

Functions:
    - rejection_order: Indices from most to least uncertain, ties in input order.
    - partition: Counts of the four cells at a reject fraction.
    - nra / cq / rq: The three quality measures.
    - sweep_curve: One curve point per reject fraction.
    - best_rejection_point: The curve point maximizing a chosen measure.
    - write_curve_csv / load_curve_csv: Curve CSV files.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from dirichlet_wrapper.errors import ConfigError

DEFAULT_FRACTIONS = tuple(i / 100 for i in range(51))
CURVE_COLUMNS = ["fraction", "threshold", "nra", "cq", "rq"]
METRICS = ("nra", "cq", "rq")

Scored = Sequence[Tuple[float, bool]]


@dataclass(frozen=True)
class RejectionPartition:
    """
    Cell counts of a rejection: accurate/misclassified x non-rejected/rejected.
    """

    an_count: int
    mn_count: int
    ar_count: int
    mr_count: int

    @property
    def total(self) -> int:
        return self.an_count + self.mn_count + self.ar_count + self.mr_count

    @property
    def accurate(self) -> int:
        return self.an_count + self.ar_count

    @property
    def misclassified(self) -> int:
        return self.mn_count + self.mr_count

    @property
    def kept(self) -> int:
        return self.an_count + self.mn_count

    @property
    def rejected(self) -> int:
        return self.ar_count + self.mr_count


@dataclass(frozen=True)
class RejectionCurvePoint:
    """
    Quality measures at one reject fraction.

    ``threshold`` is the lowest rejected score (+inf when nothing is rejected);
    ``rq`` may be +inf, and ``nra``/``rq`` are NaN where undefined.
    """

    rejected_fraction: float
    nra: float
    cq: float
    rq: float
    threshold: float


def _as_arrays(scored: Scored) -> Tuple[np.ndarray, np.ndarray]:
    if len(scored) == 0:
        raise ConfigError("cannot evaluate rejection on an empty set of predictions")
    scores = np.array([float(s) for s, _ in scored])
    correct = np.array([bool(c) for _, c in scored])
    return scores, correct


def rejection_order(scores: Sequence[float]) -> np.ndarray:
    """Indices sorted by descending score; equal scores keep their input order."""
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


def reject_count(fraction: float, n: int) -> int:
    """floor(fraction * n), rounded first so that e.g. 0.29 * 100 counts 29."""
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"reject fraction must lie in [0, 1], got {fraction}")
    return int(math.floor(round(fraction * n, 9)))


def _partition_sorted(correct_sorted: np.ndarray, k: int) -> RejectionPartition:
    ar = int(np.count_nonzero(correct_sorted[:k]))
    an = int(np.count_nonzero(correct_sorted[k:]))
    return RejectionPartition(
        an_count=an,
        mn_count=int(correct_sorted.size - k - an),
        ar_count=ar,
        mr_count=int(k - ar),
    )


def partition(scored: Scored, reject_fraction: float) -> RejectionPartition:
    """
    Rejects the floor(reject_fraction * n) highest-scoring predictions.

    Args:
        scored (Sequence[Tuple[float, bool]]): (score, correct) per prediction, in example-id order.
        reject_fraction (float): Fraction to reject, in [0, 1].

    Returns:
        RejectionPartition: The four cell counts.

    Raises:
        ConfigError: If the input is empty or the fraction is outside [0, 1].

    Example:
        >>> partition([(3, False), (2, False), (1, True), (0, True)], 0.5)
        RejectionPartition(an_count=2, mn_count=0, ar_count=0, mr_count=2)
    """
    scores, correct = _as_arrays(scored)
    k = reject_count(reject_fraction, scores.size)
    return _partition_sorted(correct[rejection_order(scores)], k)


def nra(p: RejectionPartition) -> float:
    """Non-rejected accuracy an / (an + mn); NaN when everything is rejected."""
    if p.kept == 0:
        logger.warning("NRA is undefined when every prediction is rejected.")
        return float("nan")
    return p.an_count / p.kept


def cq(p: RejectionPartition) -> float:
    """Classification quality (an + mr) / n."""
    if p.total == 0:
        raise ConfigError("classification quality needs at least one prediction")
    return (p.an_count + p.mr_count) / p.total


def rq(p: RejectionPartition) -> float:
    """
    Rejection quality (mr |A|) / (ar |M|).

    Returns +inf when no accurate point is rejected but some misclassified one is,
    1.0 when nothing is rejected, and NaN when there are no misclassified points.
    """
    if p.misclassified == 0:
        logger.warning("RQ is undefined when no prediction is misclassified.")
        return float("nan")
    if p.ar_count == 0:
        return math.inf if p.mr_count > 0 else 1.0
    return (p.mr_count * p.accurate) / (p.ar_count * p.misclassified)


def sweep_curve(
    scored: Scored, fractions: Sequence[float] = DEFAULT_FRACTIONS
) -> List[RejectionCurvePoint]:
    """
    Evaluates the rejection at every fraction of a grid.

    Args:
        scored (Sequence[Tuple[float, bool]]): (score, correct) per prediction, in example-id order.
        fractions (Sequence[float], optional): Ascending fractions in [0, 1]. Defaults to 0%..50% by 1%.

    Returns:
        List[RejectionCurvePoint]: One point per fraction.

    Raises:
        ConfigError: If the grid is not ascending within [0, 1] or the input is empty.
    """
    grid = [float(f) for f in fractions]
    if any(not 0.0 <= f <= 1.0 for f in grid) or any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"fractions must be ascending within [0, 1]: {grid}")
    scores, correct = _as_arrays(scored)
    order = rejection_order(scores)
    scores_sorted, correct_sorted = scores[order], correct[order]

    curve = []
    for fraction in grid:
        k = reject_count(fraction, scores.size)
        p = _partition_sorted(correct_sorted, k)
        curve.append(
            RejectionCurvePoint(
                rejected_fraction=fraction,
                nra=nra(p),
                cq=cq(p),
                rq=rq(p),
                threshold=float(scores_sorted[k - 1]) if k > 0 else math.inf,
            )
        )
    logger.debug(f"Swept {len(grid)} reject fractions over {scores.size} predictions.")
    return curve


def best_rejection_point(
    curve: Sequence[RejectionCurvePoint], metric: str = "cq"
) -> RejectionCurvePoint:
    """
    Returns the point maximizing ``metric``; ties go to the smallest fraction, NaN never wins.

    Raises:
        ConfigError: If the metric is unknown or every value is NaN.
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric '{metric}' (choose from {', '.join(METRICS)})")
    candidates = [p for p in curve if not math.isnan(getattr(p, metric))]
    if not candidates:
        raise ConfigError(f"no defined {metric} value on the curve")
    return max(candidates, key=lambda p: (getattr(p, metric), -p.rejected_fraction))


def curve_to_frame(curve: Sequence[RejectionCurvePoint]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "fraction": [p.rejected_fraction for p in curve],
            "threshold": [p.threshold for p in curve],
            "nra": [p.nra for p in curve],
            "cq": [p.cq for p in curve],
            "rq": [p.rq for p in curve],
        },
        columns=CURVE_COLUMNS,
    )


def frame_to_curve(frame: pd.DataFrame) -> List[RejectionCurvePoint]:
    return [
        RejectionCurvePoint(
            rejected_fraction=float(row.fraction),
            nra=float(row.nra),
            cq=float(row.cq),
            rq=float(row.rq),
            threshold=float(row.threshold),
        )
        for row in frame.itertuples(index=False)
    ]


def write_curve_csv(curve: Sequence[RejectionCurvePoint], path: Union[str, Path]) -> Path:
    """Writes ``fraction,threshold,nra,cq,rq``; infinities as ``inf``, undefined values as ``nan``."""
    target = Path(path)
    try:
        curve_to_frame(curve).to_csv(target, index=False, na_rep="nan")
    except OSError as e:
        raise ConfigError(f"Failed to write curve file '{target}': {e}") from e
    logger.info(f"Rejection curve with {len(curve)} points written to '{target}'.")
    return target


def load_curve_csv(path: Union[str, Path]) -> List[RejectionCurvePoint]:
    """Reads a curve CSV written by :func:`write_curve_csv`."""
    source = Path(path)
    try:
        frame = pd.read_csv(source, float_precision="round_trip")
    except (OSError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"Failed to read curve file '{source}': {e}") from e
    if list(frame.columns) != CURVE_COLUMNS:
        raise ConfigError(f"curve file '{source}' has columns {list(frame.columns)}, expected {CURVE_COLUMNS}")
    return frame_to_curve(frame)
