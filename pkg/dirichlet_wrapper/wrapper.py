# wrapper.py

"""
Uncertainty Wrapper

Wraps black-box probabilities y with a Dirichlet distribution Dir(beta * y) whose
scale beta is regressed from the input features. Holds the regularized
cross-entropy loss over Monte Carlo means, its pathwise gradient through the
Dirichlet samples, the training loop, and the enrichment of new predictions.

Functions:
    - compose_alpha: Builds alpha = beta * clip-renormalized y.
    - mc_expected_output: Monte Carlo mean of M Dirichlet samples.
    - regularized_cross_entropy: Loss value from given Monte Carlo means and betas.
    - wrapper_loss: Loss and per-item beta for a batch under given noise.
    - wrapper_loss_and_grad: Loss together with gradients for every regressor parameter.
    - gradient_check: Compares analytic loss gradients with central finite differences.
    - train_wrapper: Mini-batch Adam training of the beta regressor.
    - enrich / enrich_batch: Turn black-box outputs into enriched predictions.
    - save_wrapper / load_wrapper: Wrapper JSON documents.
    - write_loss_trace: Writes the per-epoch loss trace as CSV.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from dirichlet_wrapper.console_manager import console_proxy
from dirichlet_wrapper.errors import ConfigError, NumericError, PredictionLookupError, ShapeError
from dirichlet_wrapper.nnet import (
    AdamState,
    DenseNetwork,
    GradientBundle,
    adam_step,
    backward,
    forward,
    init_network,
    load_network,
    save_network,
)
from dirichlet_wrapper.numerics import (
    EPSILON_CLIP,
    UniformNoiseBlock,
    check_probability_vector,
    clip_renormalize,
    dirichlet_sample,
    dirichlet_sample_batch,
    sample_derivative_batch,
    stream_id_for,
    uniform_noise,
)

BETA_MIN = 1e-2
LOG_FLOOR = 1e-12
DEFAULT_HIDDEN = (20, 20, 20, 20)


@dataclass(frozen=True)
class TrainConfig:
    """
    Wrapper training settings.

    Attributes:
        epochs (int): Passes over the dataset; 0 returns the initialized model.
        batch_size (int): Mini-batch size.
        lr (float): Adam learning rate.
        m_train (int): Monte Carlo samples per item during training.
        lam (float): Weight of the mean squared beta regularizer.
        seed (int): Seed for initialization, shuffling and training noise.
    """

    epochs: int = 80
    batch_size: int = 32
    lr: float = 1e-3
    m_train: int = 20
    lam: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.m_train < 1:
            raise ConfigError(f"m_train must be >= 1, got {self.m_train}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class WrapperModel:
    """
    The trained wrapper: a beta regressor plus its output transform.

    Attributes:
        regressor (DenseNetwork): Network with a single softplus output.
        beta_min (float): Offset added to the regressor output, the smallest reachable beta.
        epsilon_clip (float): Lower clip of black-box probabilities.
        m_train (int): Monte Carlo samples used in training.
        lam (float): Regularization weight used in training.
    """

    regressor: DenseNetwork
    beta_min: float = BETA_MIN
    epsilon_clip: float = EPSILON_CLIP
    m_train: int = 20
    lam: float = 1e-4

    def __post_init__(self):
        if self.regressor.output_dim != 1:
            raise ShapeError(f"beta regressor must have one output, has {self.regressor.output_dim}")
        if not self.beta_min > 0:
            raise ConfigError(f"beta_min must be > 0, got {self.beta_min}")
        if not 0 < self.epsilon_clip < 1:
            raise ConfigError(f"epsilon_clip must be in (0, 1), got {self.epsilon_clip}")

    @property
    def input_dim(self) -> int:
        return self.regressor.input_dim

    def betas(self, features: np.ndarray) -> np.ndarray:
        """beta = beta_min + regressor(features) for a (N, d) feature matrix."""
        out, _ = forward(self.regressor, np.atleast_2d(np.asarray(features, dtype=float)))
        return self.beta_min + out[:, 0]


@dataclass(frozen=True)
class EnrichedPrediction:
    """
    A black-box output together with its Dirichlet parameters.

    ``beta`` and ``alpha`` are None for predictions that never went through a
    wrapper (baseline scoring only needs ``y``).
    """

    y: np.ndarray
    beta: Optional[float] = None
    alpha: Optional[np.ndarray] = None
    example_id: Optional[str] = None

    @classmethod
    def unenriched(cls, example_id: Optional[str], y: Sequence[float]) -> "EnrichedPrediction":
        return cls(y=check_probability_vector(y), example_id=example_id)

    @property
    def is_enriched(self) -> bool:
        return self.alpha is not None


@dataclass(frozen=True)
class WrapperDataset:
    """
    Aligned training arrays for the wrapper.

    Attributes:
        example_ids (Tuple[str, ...]): Stable ids, used to key training noise.
        features (np.ndarray): (N, d) regressor inputs.
        labels (np.ndarray): (N, C) one-hot (or soft) labels.
        probs (np.ndarray): (N, C) black-box probabilities.
    """

    example_ids: Tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        n = len(self.example_ids)
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ShapeError(f"features shape {self.features.shape} does not match {n} examples")
        if self.labels.shape != self.probs.shape or self.probs.shape[0] != n:
            raise ShapeError(
                f"labels {self.labels.shape} and probabilities {self.probs.shape} must both be ({n}, C)"
            )

    def __len__(self) -> int:
        return len(self.example_ids)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    def subset(self, index: np.ndarray) -> "WrapperDataset":
        return WrapperDataset(
            example_ids=tuple(self.example_ids[i] for i in index),
            features=self.features[index],
            labels=self.labels[index],
            probs=self.probs[index],
        )

    @classmethod
    def from_arrays(
        cls,
        example_ids: Sequence[str],
        features: np.ndarray,
        label_index: Sequence[int],
        probs: np.ndarray,
    ) -> "WrapperDataset":
        """Builds the dataset from integer labels, one-hot encoding them over C = probs width."""
        probs = np.asarray(probs, dtype=float)
        labels_idx = np.asarray(label_index, dtype=int)
        num_classes = probs.shape[1]
        if np.any((labels_idx < 0) | (labels_idx >= num_classes)):
            raise ConfigError(f"labels must lie in [0, {num_classes})")
        labels = np.eye(num_classes)[labels_idx]
        return cls(
            example_ids=tuple(example_ids),
            features=np.asarray(features, dtype=float),
            labels=labels,
            probs=probs,
        )

    @classmethod
    def from_records(
        cls,
        example_ids: Sequence[str],
        features: np.ndarray,
        label_index: Sequence[int],
        predictions: Mapping[str, np.ndarray],
    ) -> "WrapperDataset":
        """
        Aligns features and labels with black-box predictions looked up by example id.

        Raises:
            PredictionLookupError: If an example has no prediction.
        """
        try:
            probs = np.stack([np.asarray(predictions[eid], dtype=float) for eid in example_ids])
        except KeyError as e:
            raise PredictionLookupError(f"no black-box prediction for example {e}") from e
        return cls.from_arrays(example_ids, features, label_index, probs)


def compose_alpha(
    y: Sequence[float], beta: float, epsilon_clip: float = EPSILON_CLIP
) -> np.ndarray:
    """
    Builds the concentration alpha = beta * clip-renormalize(y).

    Args:
        y (Sequence[float]): Black-box probability vector.
        beta (float): Concentration scale, beta > 0.
        epsilon_clip (float, optional): Lower clip, must be below 1 / C. Defaults to 1e-6.

    Returns:
        np.ndarray: Strictly positive concentration vector.

    Raises:
        DomainError: If y is not a probability vector.
        ConfigError: If beta <= 0 or epsilon_clip >= 1 / C.

    Example:
        >>> compose_alpha([0.25, 0.25, 0.5], 5.0).tolist()
        [1.25, 1.25, 2.5]
    """
    y_arr = check_probability_vector(y)
    if not beta > 0:
        raise ConfigError(f"beta must be > 0, got {beta}")
    if not 0 < epsilon_clip < 1.0 / y_arr.size:
        raise ConfigError(f"epsilon_clip must lie in (0, 1/C), got {epsilon_clip}")
    return float(beta) * clip_renormalize(y_arr, epsilon_clip)


def mc_expected_output(alpha: Sequence[float], m: int, noise: UniformNoiseBlock) -> np.ndarray:
    """
    Monte Carlo mean of M Dirichlet(alpha) samples drawn from ``noise``.

    Raises:
        ShapeError: If the noise block does not have M rows.
    """
    if noise.samples != m:
        raise ShapeError(f"noise block has {noise.samples} rows, expected M={m}")
    return dirichlet_sample(alpha, noise).mean(axis=0)


def training_noise(seed: int, epoch: int, example_ids: Sequence[str], m: int, c: int) -> np.ndarray:
    """Stacks the per-example training noise of one epoch into an (N, M, C) array."""
    if not example_ids:
        return np.empty((0, m, c))
    return np.stack(
        [uniform_noise(seed, stream_id_for("train", epoch, eid), m, c).u for eid in example_ids]
    )


def regularized_cross_entropy(
    labels: np.ndarray, mc_means: np.ndarray, betas: np.ndarray, lam: float
) -> float:
    """
    -(1/(N C)) sum_i sum_c label_ic * ln(max(mean_ic, 1e-12)) + lam * mean(beta_i ** 2)

    Example:
        >>> round(regularized_cross_entropy(np.array([[1.0, 0.0]]), np.array([[0.8, 0.2]]), np.array([3.0]), 0.0), 7)
        0.1115718
    """
    labels = np.asarray(labels, dtype=float)
    mc_means = np.asarray(mc_means, dtype=float)
    betas = np.asarray(betas, dtype=float)
    n, c = labels.shape
    log_means = np.log(np.maximum(mc_means, LOG_FLOOR))
    cross_entropy = -np.sum(labels * log_means) / (n * c)
    return float(cross_entropy + lam * np.mean(betas**2))


def _check_batch_noise(batch: WrapperDataset, noise: np.ndarray) -> np.ndarray:
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 3 or noise.shape[0] != len(batch) or noise.shape[2] != batch.num_classes:
        raise ShapeError(
            f"noise shape {noise.shape} does not match a batch of {len(batch)} x {batch.num_classes}"
        )
    return noise


def _raise_non_finite(batch: WrapperDataset, values: np.ndarray, what: str) -> None:
    rows = values.reshape(len(batch), -1)
    bad = np.flatnonzero(~np.all(np.isfinite(rows), axis=1))
    if bad.size:
        example_id = batch.example_ids[bad[0]]
        logger.error(f"Non-finite {what} for example '{example_id}'.")
        raise NumericError(f"non-finite {what} for example '{example_id}'", {"example_id": example_id})


def wrapper_loss(
    model: WrapperModel, batch: WrapperDataset, noise: np.ndarray
) -> Tuple[float, np.ndarray]:
    """
    Regularized cross-entropy of the Monte Carlo means for one batch.

    Args:
        model (WrapperModel): The wrapper.
        batch (WrapperDataset): Items with features, labels and black-box probabilities.
        noise (np.ndarray): (N, M, C) uniforms, one block per item.

    Returns:
        Tuple[float, np.ndarray]: The loss and the per-item beta.

    Raises:
        NumericError: If any intermediate is non-finite; identifies the item.
    """
    noise = _check_batch_noise(batch, noise)
    betas = model.betas(batch.features)
    alphas = betas[:, None] * clip_renormalize(batch.probs, model.epsilon_clip)
    means = dirichlet_sample_batch(alphas, noise).mean(axis=1)
    _raise_non_finite(batch, means, "Monte Carlo mean")
    loss = regularized_cross_entropy(batch.labels, means, betas, model.lam)
    if not np.isfinite(loss):
        raise NumericError("non-finite wrapper loss", {"batch_size": len(batch)})
    return loss, betas


def wrapper_loss_and_grad(
    model: WrapperModel, batch: WrapperDataset, noise: np.ndarray
) -> Tuple[float, np.ndarray, GradientBundle]:
    """
    Loss, per-item beta and regressor gradients for one batch.

    The gradient flows from the log of the Monte Carlo means through the
    common-random-number derivative of each sample with respect to beta into
    the regressor. The beta_min offset has unit slope.

    Returns:
        Tuple[float, np.ndarray, GradientBundle]: Loss, betas and gradients of the loss.
    """
    noise = _check_batch_noise(batch, noise)
    n, c = batch.labels.shape
    raw, tape = forward(model.regressor, batch.features)
    raw = raw[:, 0]
    betas = model.beta_min + raw
    y = clip_renormalize(batch.probs, model.epsilon_clip)

    samples, d_samples = sample_derivative_batch(y, betas, noise)
    means = samples.mean(axis=1)
    _raise_non_finite(batch, means, "Monte Carlo mean")
    _raise_non_finite(batch, d_samples, "sample derivative")
    loss = regularized_cross_entropy(batch.labels, means, betas, model.lam)

    floored = means < LOG_FLOOR
    d_means = np.where(floored, 0.0, -batch.labels / (n * c * np.maximum(means, LOG_FLOOR)))
    d_beta = np.sum(d_means * d_samples.mean(axis=1), axis=1) + 2.0 * model.lam * betas / n
    grads = backward(model.regressor, tape, d_beta[:, None])
    if not grads.is_finite():
        raise NumericError("non-finite regressor gradient", {"batch_size": n})
    return loss, betas, grads


def gradient_check(
    model: WrapperModel,
    batch: WrapperDataset,
    noise: np.ndarray,
    step: float = 1e-4,
    max_parameters: Optional[int] = None,
    seed: int = 0,
) -> Dict[str, float]:
    """
    Compares the analytic loss gradient with central finite differences under frozen noise.

    Args:
        model (WrapperModel): The wrapper to check.
        batch (WrapperDataset): Items to evaluate the loss on.
        noise (np.ndarray): (N, M, C) uniforms, shared by every evaluation.
        step (float, optional): Finite-difference step. Defaults to 1e-4.
        max_parameters (Optional[int], optional): Check a seeded random subset of this many
            parameters instead of all of them.
        seed (int, optional): Seed of the subset selection.

    Returns:
        Dict[str, float]: ``max_rel_error``, ``max_abs_error`` and ``checked`` (parameter count).
    """
    _, _, grads = wrapper_loss_and_grad(model, batch, noise)
    params = model.regressor.parameters()
    analytic = np.concatenate([g.ravel() for g in grads.parameters()])
    sizes = [p.size for p in params]
    offsets = np.cumsum([0] + sizes)

    flat_index = np.arange(offsets[-1])
    if max_parameters is not None and max_parameters < flat_index.size:
        flat_index = np.sort(
            np.random.default_rng(seed).choice(flat_index, size=max_parameters, replace=False)
        )

    def loss_with(param_index: int, offset: int, delta: float) -> float:
        perturbed = [p.copy() for p in params]
        perturbed[param_index].ravel()[offset] += delta
        candidate = WrapperModel(
            regressor=model.regressor.with_parameters(perturbed),
            beta_min=model.beta_min,
            epsilon_clip=model.epsilon_clip,
            m_train=model.m_train,
            lam=model.lam,
        )
        return wrapper_loss(candidate, batch, noise)[0]

    max_rel, max_abs = 0.0, 0.0
    for index in flat_index:
        param_index = int(np.searchsorted(offsets, index, side="right") - 1)
        offset = int(index - offsets[param_index])
        numeric = (loss_with(param_index, offset, step) - loss_with(param_index, offset, -step)) / (2 * step)
        error = abs(analytic[index] - numeric)
        scale = max(abs(analytic[index]), abs(numeric), 1e-6)
        max_abs = max(max_abs, error)
        max_rel = max(max_rel, error / scale)
    logger.info(
        f"Gradient check over {flat_index.size} parameters: max relative error {max_rel:.3e}, "
        f"max absolute error {max_abs:.3e}."
    )
    return {"max_rel_error": max_rel, "max_abs_error": max_abs, "checked": float(flat_index.size)}


def init_wrapper(
    input_dim: int,
    config: TrainConfig,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    beta_min: float = BETA_MIN,
    epsilon_clip: float = EPSILON_CLIP,
) -> WrapperModel:
    """Builds an untrained wrapper: ReLU hidden layers and a softplus scalar head."""
    spec = [(size, "relu") for size in hidden] + [(1, "softplus")]
    return WrapperModel(
        regressor=init_network(input_dim, spec, seed=config.seed),
        beta_min=beta_min,
        epsilon_clip=epsilon_clip,
        m_train=config.m_train,
        lam=config.lam,
    )


def train_wrapper(
    dataset: WrapperDataset,
    config: TrainConfig,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    beta_min: float = BETA_MIN,
    epsilon_clip: float = EPSILON_CLIP,
    initial: Optional[WrapperModel] = None,
) -> Tuple[WrapperModel, List[float]]:
    """
    Trains the beta regressor with mini-batch Adam on the regularized cross-entropy.

    Each epoch shuffles the items with the seeded generator and draws fresh noise
    keyed by (seed, epoch, example_id); within a step every evaluation shares it.

    Args:
        dataset (WrapperDataset): Labeled target-domain items with black-box predictions.
        config (TrainConfig): Training settings.
        hidden (Sequence[int], optional): Hidden layer sizes. Defaults to four layers of 20.
        beta_min (float, optional): Offset added to beta. Defaults to 1e-2.
        epsilon_clip (float, optional): Probability clip. Defaults to 1e-6.
        initial (Optional[WrapperModel], optional): Start from this model instead of a fresh one.

    Returns:
        Tuple[WrapperModel, List[float]]: The trained wrapper and the epoch-mean loss trace.

    Raises:
        ConfigError: If the dataset is empty.
        NumericError: If a batch loss is non-finite; carries epoch and batch index.
    """
    if len(dataset) == 0:
        raise ConfigError("cannot train the wrapper on an empty dataset")

    model = initial or init_wrapper(dataset.features.shape[1], config, hidden, beta_min, epsilon_clip)
    model = WrapperModel(
        regressor=model.regressor,
        beta_min=model.beta_min,
        epsilon_clip=model.epsilon_clip,
        m_train=config.m_train,
        lam=config.lam,
    )
    state = AdamState.for_network(model.regressor, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    n = len(dataset)
    trace: List[float] = []

    logger.info(
        f"Training wrapper on {n} examples: epochs={config.epochs}, batch_size={config.batch_size}, "
        f"lr={config.lr}, M={config.m_train}, lambda={config.lam}, seed={config.seed}."
    )
    with console_proxy.progress() as progress:
        task = progress.add_task("Training wrapper", total=config.epochs)
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(n)
            noise = training_noise(
                config.seed, epoch, dataset.example_ids, config.m_train, dataset.num_classes
            )
            weighted_loss = 0.0
            for batch_index, start in enumerate(range(0, n, config.batch_size)):
                index = order[start : start + config.batch_size]
                batch = dataset.subset(index)
                try:
                    loss, _, grads = wrapper_loss_and_grad(model, batch, noise[index])
                except NumericError as e:
                    raise NumericError(
                        f"epoch {epoch}, batch {batch_index}: {e}",
                        {**e.params, "epoch": epoch, "batch": batch_index},
                    ) from e
                if not np.isfinite(loss):
                    raise NumericError(
                        f"non-finite loss at epoch {epoch}, batch {batch_index}",
                        {"epoch": epoch, "batch": batch_index},
                    )
                regressor, state = adam_step(model.regressor, grads, state)
                model = WrapperModel(
                    regressor=regressor,
                    beta_min=model.beta_min,
                    epsilon_clip=model.epsilon_clip,
                    m_train=model.m_train,
                    lam=model.lam,
                )
                weighted_loss += loss * index.size
                logger.debug(f"epoch {epoch} batch {batch_index}: loss={loss:.6f}")
            trace.append(weighted_loss / n)
            logger.info(f"Epoch {epoch}/{config.epochs}: mean loss {trace[-1]:.6f}")
            progress.advance(task)
    return model, trace


def enrich(
    model: WrapperModel,
    features: Sequence[float],
    y: Sequence[float],
    example_id: Optional[str] = None,
) -> EnrichedPrediction:
    """
    Attaches beta and alpha to one black-box output.

    Raises:
        ShapeError: If the feature length does not match the regressor.
    """
    features_arr = np.asarray(features, dtype=float)
    if features_arr.ndim != 1 or features_arr.size != model.input_dim:
        raise ShapeError(f"wrapper expects {model.input_dim} features, got shape {features_arr.shape}")
    beta = float(model.betas(features_arr[None, :])[0])
    return EnrichedPrediction(
        y=check_probability_vector(y),
        beta=beta,
        alpha=compose_alpha(y, beta, model.epsilon_clip),
        example_id=example_id,
    )


def enrich_batch(
    model: WrapperModel,
    features: np.ndarray,
    probs: np.ndarray,
    example_ids: Optional[Sequence[str]] = None,
) -> List[EnrichedPrediction]:
    """Enriches a batch of black-box outputs, one regressor pass for all rows."""
    features = np.asarray(features, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if features.ndim != 2 or features.shape[1] != model.input_dim:
        raise ShapeError(f"wrapper expects {model.input_dim} features, got shape {features.shape}")
    if probs.shape[0] != features.shape[0]:
        raise ShapeError(f"{features.shape[0]} feature rows but {probs.shape[0]} predictions")
    ids = list(example_ids) if example_ids is not None else [None] * len(probs)
    betas = model.betas(features) if len(features) else np.empty(0)
    return [
        EnrichedPrediction(
            y=check_probability_vector(p),
            beta=float(b),
            alpha=compose_alpha(p, float(b), model.epsilon_clip),
            example_id=eid,
        )
        for p, b, eid in zip(probs, betas, ids)
    ]


def save_wrapper(model: WrapperModel, path: Union[str, Path]) -> Path:
    """Writes the regressor JSON document extended with the wrapper settings."""
    return save_network(
        model.regressor,
        path,
        extra={
            "beta_min": model.beta_min,
            "epsilon_clip": model.epsilon_clip,
            "M_train": model.m_train,
            "lambda": model.lam,
        },
    )


def load_wrapper(path: Union[str, Path]) -> WrapperModel:
    """Reads a wrapper JSON document written by :func:`save_wrapper`."""
    regressor, document = load_network(path)
    try:
        return WrapperModel(
            regressor=regressor,
            beta_min=float(document["beta_min"]),
            epsilon_clip=float(document["epsilon_clip"]),
            m_train=int(document["M_train"]),
            lam=float(document["lambda"]),
        )
    except KeyError as e:
        raise ConfigError(f"wrapper file '{path}' is missing key {e}") from e


def write_loss_trace(trace: Sequence[float], path: Union[str, Path]) -> Path:
    """Writes the loss trace as CSV with header ``epoch,loss`` (epochs numbered from 1)."""
    target = Path(path)
    frame = pd.DataFrame({"epoch": np.arange(1, len(trace) + 1), "loss": list(trace)})
    try:
        frame.to_csv(target, index=False)
    except OSError as e:
        raise ConfigError(f"Failed to write loss trace '{target}': {e}") from e
    logger.info(f"Loss trace written to '{target}'.")
    return target
