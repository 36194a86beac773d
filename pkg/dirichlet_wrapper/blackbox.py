# blackbox.py

"""
Black-Box Sources

Everything the wrapper knows about the classifier it wraps comes through this
module, and only as probability vectors. Three sources are available: a small
softmax network trained in-process (the simulated black-box), a JSONL file of
stored predictions, and an HTTP prediction service.

Functions:
    - train_simulated_blackbox: Trains the simulated softmax classifier on source-domain data.
    - predict: One prediction from any source.
    - batch_predict: Predictions for a dataset, preserving order.
    - accuracy: Fraction of predictions whose argmax equals the label.
    - load_predictions / save_predictions: Predictions JSONL files.
    - load_simulated_blackbox / save_simulated_blackbox: Simulated model JSON files.
"""

import json
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import requests
from loguru import logger

from dirichlet_wrapper.console_manager import console_proxy
from dirichlet_wrapper.errors import (
    ConfigError,
    ParseError,
    PredictionLookupError,
    ShapeError,
    TransportError,
)
from dirichlet_wrapper.nnet import (
    AdamState,
    DenseNetwork,
    adam_step,
    backward,
    forward,
    init_network,
    load_network,
    save_network,
)
from dirichlet_wrapper.numerics import check_probability_vector
from dirichlet_wrapper.utils import argmax_lowest

REMOTE_BATCH_SIZE = 64
REMOTE_MAX_WORKERS = 4
REMOTE_RETRIES = 2
RENORMALIZE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class PredictionRecord:
    """
    One black-box prediction.

    Attributes:
        example_id (str): Id of the predicted example.
        probs (Tuple[float, ...]): Class probabilities.
    """

    example_id: str
    probs: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


@dataclass(frozen=True)
class BlackBoxTrainConfig:
    """Training settings of the simulated black-box."""

    hidden: Tuple[int, ...] = (32, 32)
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden sizes must be positive, got {self.hidden}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")


@dataclass(frozen=True)
class TrainReport:
    """Accuracies measured after training the simulated black-box."""

    train_accuracy: float
    validation_accuracy: Optional[float]


class BlackBoxSource(ABC):
    """A classifier that exposes nothing but probability vectors."""

    variant = "abstract"

    @abstractmethod
    def predict_one(self, example_id: str, features: Optional[np.ndarray]) -> PredictionRecord:
        """Predicts a single example."""

    def predict_many(
        self, example_ids: Sequence[str], features: Optional[np.ndarray]
    ) -> List[PredictionRecord]:
        rows = [None] * len(example_ids) if features is None else features
        return [self.predict_one(eid, row) for eid, row in zip(example_ids, rows)]


class SimulatedBlackBox(BlackBoxSource):
    """
    An in-process softmax network standing in for a prediction API.

    Args:
        network (DenseNetwork): Network whose final activation is softmax.
    """

    variant = "simulated"

    def __init__(self, network: DenseNetwork):
        if network.layers[-1].activation != "softmax":
            raise ConfigError("the simulated black-box needs a softmax output layer")
        self.network = network

    @property
    def num_classes(self) -> int:
        return self.network.output_dim

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        out, _ = forward(self.network, features)
        return out

    def predict_one(self, example_id: str, features: Optional[np.ndarray]) -> PredictionRecord:
        if features is None:
            raise ShapeError(f"the simulated black-box needs features for '{example_id}'")
        return PredictionRecord(example_id, self.probabilities(np.asarray(features, dtype=float)))

    def predict_many(
        self, example_ids: Sequence[str], features: Optional[np.ndarray]
    ) -> List[PredictionRecord]:
        if not len(example_ids):
            return []
        if features is None:
            raise ShapeError("the simulated black-box needs features")
        probs = self.probabilities(np.asarray(features, dtype=float))
        return [PredictionRecord(eid, p) for eid, p in zip(example_ids, probs)]


class FileBlackBox(BlackBoxSource):
    """
    Predictions looked up by example id from a stored map.

    Args:
        records (Dict[str, PredictionRecord]): Records keyed by example id.
    """

    variant = "file"

    def __init__(self, records: Dict[str, PredictionRecord]):
        self.records = dict(records)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "FileBlackBox":
        return cls({r.example_id: r for r in load_predictions(path)})

    def predict_one(self, example_id: str, features: Optional[np.ndarray] = None) -> PredictionRecord:
        try:
            return self.records[example_id]
        except KeyError:
            raise PredictionLookupError(f"no stored prediction for example '{example_id}'") from None


class RemoteBlackBox(BlackBoxSource):
    """
    Client for an HTTP prediction service.

    The service takes ``POST {"instances": [[...], ...]}`` and answers
    ``{"probabilities": [[...], ...]}`` with one row per instance.

    Args:
        endpoint (str): URL of the prediction endpoint.
        timeout (float, optional): Per-request timeout in seconds. Defaults to 10.
        batch_size (int, optional): Instances per request. Defaults to 64.
        max_workers (int, optional): Requests in flight. Defaults to 4.
        retries (int, optional): Retries on connection errors and 5xx answers. Defaults to 2.
        backoff (float, optional): First retry delay in seconds, doubled each retry. Defaults to 0.5.
    """

    variant = "remote"

    def __init__(
        self,
        endpoint: str,
        timeout: float = 10.0,
        batch_size: int = REMOTE_BATCH_SIZE,
        max_workers: int = REMOTE_MAX_WORKERS,
        retries: int = REMOTE_RETRIES,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.batch_size = batch_size
        self.max_workers = max_workers
        self.retries = retries
        self.backoff = backoff
        self.num_classes: Optional[int] = None
        self.session = requests.Session()

    def _post(self, instances: List[List[float]], first_id: str) -> dict:
        body = json.dumps({"instances": instances})
        headers = {"Content-Type": "application/json"}
        for attempt in range(self.retries + 1):
            try:
                response = self.session.post(
                    self.endpoint, data=body, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as e:
                reason = f"request failed: {e}"
            else:
                if 400 <= response.status_code < 500:
                    raise TransportError(
                        f"service rejected the request with HTTP {response.status_code}",
                        self.endpoint,
                        first_id,
                    )
                if response.status_code < 400:
                    try:
                        return response.json()
                    except ValueError as e:
                        raise TransportError(f"response is not JSON: {e}", self.endpoint, first_id) from e
                reason = f"HTTP {response.status_code}"
            if attempt < self.retries:
                delay = self.backoff * 2**attempt
                logger.warning(f"Prediction request to {self.endpoint} failed ({reason}); retrying in {delay:.1f}s.")
                time.sleep(delay)
        logger.error(f"Prediction request to {self.endpoint} failed after {self.retries + 1} attempts: {reason}")
        raise TransportError(f"{reason} after {self.retries + 1} attempts", self.endpoint, first_id)

    def _validate_row(self, row: object, example_id: str) -> np.ndarray:
        if not isinstance(row, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in row
        ):
            raise TransportError("malformed probability row", self.endpoint, example_id)
        probs = np.asarray(row, dtype=float)
        if self.num_classes is not None and probs.size != self.num_classes:
            raise TransportError(
                f"expected {self.num_classes} probabilities, got {probs.size}", self.endpoint, example_id
            )
        if probs.size == 0 or not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise TransportError("probabilities must be finite and non-negative", self.endpoint, example_id)
        total = probs.sum()
        if abs(total - 1.0) > RENORMALIZE_TOLERANCE:
            raise TransportError(f"probabilities sum to {total!r}", self.endpoint, example_id)
        if total != 1.0:
            probs = probs / total
        return probs

    def _predict_chunk(self, example_ids: Sequence[str], rows: np.ndarray) -> List[PredictionRecord]:
        payload = self._post(np.asarray(rows, dtype=float).tolist(), example_ids[0])
        if not isinstance(payload, dict) or not isinstance(payload.get("probabilities"), list):
            raise TransportError("response lacks a 'probabilities' list", self.endpoint, example_ids[0])
        answer = payload["probabilities"]
        if len(answer) != len(example_ids):
            raise TransportError(
                f"response has {len(answer)} rows for {len(example_ids)} instances",
                self.endpoint,
                example_ids[0],
            )
        records = []
        for eid, row in zip(example_ids, answer):
            probs = self._validate_row(row, eid)
            if self.num_classes is None:
                self.num_classes = probs.size
            records.append(PredictionRecord(eid, probs))
        return records

    def predict_one(self, example_id: str, features: Optional[np.ndarray]) -> PredictionRecord:
        if features is None:
            raise ShapeError(f"the remote black-box needs features for '{example_id}'")
        return self._predict_chunk([example_id], np.asarray(features, dtype=float)[None, :])[0]

    def predict_many(
        self, example_ids: Sequence[str], features: Optional[np.ndarray]
    ) -> List[PredictionRecord]:
        if not len(example_ids):
            return []
        if features is None:
            raise ShapeError("the remote black-box needs features")
        features = np.asarray(features, dtype=float)
        starts = list(range(0, len(example_ids), self.batch_size))
        records: List[PredictionRecord] = []
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor, console_proxy.progress() as progress:
            task = progress.add_task("Querying remote black-box", total=len(starts))
            futures = [
                executor.submit(
                    self._predict_chunk,
                    list(example_ids[s : s + self.batch_size]),
                    features[s : s + self.batch_size],
                )
                for s in starts
            ]
            # chunks are collected in submission order, so the first failure reported is the earliest one
            for future in futures:
                records.extend(future.result())
                progress.advance(task)
        return records


def predict(
    source: BlackBoxSource,
    features: Optional[Sequence[float]] = None,
    example_id: str = "",
) -> PredictionRecord:
    """
    One prediction from any source.

    Args:
        source (BlackBoxSource): The black-box.
        features (Optional[Sequence[float]], optional): Input features (simulated and remote sources).
        example_id (str, optional): Example id (required by the file source).

    Returns:
        PredictionRecord: A record with a valid probability vector.

    Raises:
        PredictionLookupError: If the file source has no record for the id.
        TransportError: If the remote service fails or answers malformed data.
    """
    row = None if features is None else np.asarray(features, dtype=float)
    return source.predict_one(example_id, row)


def batch_predict(
    source: BlackBoxSource,
    example_ids: Sequence[str],
    features: Optional[np.ndarray] = None,
) -> List[PredictionRecord]:
    """
    Predictions for a dataset in input order.

    Args:
        source (BlackBoxSource): The black-box.
        example_ids (Sequence[str]): Example ids.
        features (Optional[np.ndarray], optional): (N, d) features, aligned with the ids.

    Returns:
        List[PredictionRecord]: One record per id, same order.
    """
    if features is not None and len(features) != len(example_ids):
        raise ShapeError(f"{len(example_ids)} ids but {len(features)} feature rows")
    records = source.predict_many(list(example_ids), features)
    logger.info(f"Obtained {len(records)} predictions from the {source.variant} black-box.")
    return records


def accuracy(probs: np.ndarray, labels: Sequence[int]) -> float:
    """Fraction of rows whose argmax (lowest index on ties) equals the label."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if labels.size == 0:
        return float("nan")
    return float(np.mean(argmax_lowest(probs) == labels))


def train_simulated_blackbox(
    features: np.ndarray,
    labels: Sequence[int],
    config: BlackBoxTrainConfig,
    validation: Optional[Tuple[np.ndarray, Sequence[int]]] = None,
    num_classes: Optional[int] = None,
) -> Tuple[SimulatedBlackBox, TrainReport]:
    """
    Trains the simulated black-box with softmax cross-entropy and Adam.

    Args:
        features (np.ndarray): (N, d) source-domain training features.
        labels (Sequence[int]): Class index per row.
        config (BlackBoxTrainConfig): Architecture and optimizer settings.
        validation (Optional[Tuple[np.ndarray, Sequence[int]]], optional): Held-out features and labels.
        num_classes (Optional[int], optional): C; defaults to max(label) + 1.

    Returns:
        Tuple[SimulatedBlackBox, TrainReport]: The trained source and its accuracies.

    Raises:
        ConfigError: If fewer than two classes are present.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if features.ndim != 2 or features.shape[0] != labels.size:
        raise ShapeError(f"features shape {features.shape} does not match {labels.size} labels")
    if np.unique(labels).size < 2:
        raise ConfigError("the black-box needs training data with at least two classes")
    c = int(num_classes or labels.max() + 1)

    spec = [(h, "relu") for h in config.hidden] + [(c, "softmax")]
    net = init_network(features.shape[1], spec, seed=config.seed)
    state = AdamState.for_network(net, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    one_hot = np.eye(c)[labels]
    n = labels.size

    logger.info(
        f"Training simulated black-box on {n} examples: hidden={list(config.hidden)}, "
        f"epochs={config.epochs}, lr={config.lr}, seed={config.seed}."
    )
    with console_proxy.progress() as progress:
        task = progress.add_task("Training black-box", total=config.epochs)
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, config.batch_size):
                index = order[start : start + config.batch_size]
                probs, tape = forward(net, features[index])
                target = one_hot[index]
                safe = np.maximum(probs, 1e-300)
                epoch_loss -= float(np.sum(target * np.log(safe)))
                grads = backward(net, tape, -target / (safe * index.size))
                net, state = adam_step(net, grads, state)
            logger.debug(f"black-box epoch {epoch}: mean loss {epoch_loss / n:.6f}")
            progress.advance(task)

    source = SimulatedBlackBox(net)
    train_accuracy = accuracy(source.probabilities(features), labels)
    validation_accuracy = None
    if validation is not None and len(validation[1]):
        validation_accuracy = accuracy(source.probabilities(np.asarray(validation[0])), validation[1])
    logger.info(f"Black-box train accuracy {train_accuracy:.4f}, validation accuracy {validation_accuracy}.")
    return source, TrainReport(train_accuracy, validation_accuracy)


def save_simulated_blackbox(source: SimulatedBlackBox, path: Union[str, Path]) -> Path:
    return save_network(source.network, path, extra={"variant": SimulatedBlackBox.variant})


def load_simulated_blackbox(path: Union[str, Path]) -> SimulatedBlackBox:
    network, _ = load_network(path)
    return SimulatedBlackBox(network)


def save_predictions(records: Sequence[PredictionRecord], path: Union[str, Path]) -> Path:
    """Writes ``{"example_id": ..., "probs": [...]}`` per line, in the given order."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps({"example_id": record.example_id, "probs": list(record.probs)}) + "\n")
    except OSError as e:
        raise ConfigError(f"Failed to write predictions '{target}': {e}") from e
    logger.info(f"Saved {len(records)} predictions to '{target}'.")
    return target


def load_predictions(path: Union[str, Path]) -> List[PredictionRecord]:
    """
    Reads a predictions JSONL file.

    Raises:
        ParseError: For malformed lines or invalid probability vectors; cites the 1-based line.
    """
    source = Path(path)
    records: List[PredictionRecord] = []
    try:
        handle = source.open("r", encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Failed to read predictions '{source}': {e}") from e
    with handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                example_id = str(entry["example_id"])
                probs = check_probability_vector(entry["probs"], atol=RENORMALIZE_TOLERANCE)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e.msg}", str(source), line_number) from e
            except (KeyError, TypeError) as e:
                raise ParseError(f"missing or malformed field {e}", str(source), line_number) from e
            except ValueError as e:
                raise ParseError(str(e), str(source), line_number) from e
            records.append(PredictionRecord(example_id, probs))
    logger.info(f"Loaded {len(records)} predictions from '{source}'.")
    return records
