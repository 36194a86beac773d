# nnet.py

"""
Dense Networks

A small dense feed-forward network on numpy arrays with reverse-mode gradients,
an Adam optimizer and a JSON document format. It is sized for the wrapper's
beta regressor and for the simulated black-box classifier; nothing more general
is attempted.

Functions:
    - init_network: Builds a Glorot-uniform initialized network from layer sizes and activations.
    - forward: Evaluates the network on a vector or a batch and records a tape.
    - backward: Reverse-mode gradients of output . d_output for every parameter and the input.
    - adam_step: One bias-corrected Adam update.
    - network_to_dict / network_from_dict: JSON document conversion.
    - save_network / load_network: JSON document files.
"""

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.special import expit

from dirichlet_wrapper.errors import ConfigError, ParseError, ShapeError

ACTIVATIONS = ("relu", "softplus", "identity", "softmax")


@dataclass(frozen=True)
class DenseLayer:
    """
    One affine layer followed by an activation.

    Attributes:
        weights (np.ndarray): Matrix of shape (out, in).
        bias (np.ndarray): Vector of length out.
        activation (str): One of relu, softplus, identity, softmax.
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: str

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class DenseNetwork:
    """
    A chain of dense layers.

    Attributes:
        layers (Tuple[DenseLayer, ...]): The layers, input to output.
        input_dim (int): Expected input length.
        seed (Optional[int]): Seed used at initialization, kept for provenance.

    Raises:
        ShapeError: If consecutive layer dimensions do not chain.
        ConfigError: If an activation is unknown or softmax is not the final activation.
    """

    layers: Tuple[DenseLayer, ...]
    input_dim: int
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("a network needs at least one layer")
        expected = self.input_dim
        for index, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"layer {index}: unknown activation '{layer.activation}'")
            if layer.activation == "softmax" and index != len(self.layers) - 1:
                raise ConfigError(f"layer {index}: softmax is only allowed as the final activation")
            if layer.weights.ndim != 2 or layer.cols != expected:
                raise ShapeError(
                    f"layer {index}: expected {expected} inputs, weights have shape {layer.weights.shape}"
                )
            if layer.bias.shape != (layer.rows,):
                raise ShapeError(f"layer {index}: bias shape {layer.bias.shape} != ({layer.rows},)")
            expected = layer.rows

    @property
    def output_dim(self) -> int:
        return self.layers[-1].rows

    def parameters(self) -> List[np.ndarray]:
        """Parameters in the order W0, b0, W1, b1, ..."""
        params = []
        for layer in self.layers:
            params.extend([layer.weights, layer.bias])
        return params

    def with_parameters(self, params: Sequence[np.ndarray]) -> "DenseNetwork":
        """Returns a copy of the network carrying ``params`` (same order as :meth:`parameters`)."""
        layers = tuple(
            replace(layer, weights=params[2 * i], bias=params[2 * i + 1])
            for i, layer in enumerate(self.layers)
        )
        return DenseNetwork(layers=layers, input_dim=self.input_dim, seed=self.seed)

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))


@dataclass(frozen=True)
class Tape:
    """Activation record of one forward call."""

    inputs: Tuple[np.ndarray, ...]  # input of each layer, (B, in)
    pre_activations: Tuple[np.ndarray, ...]  # z of each layer, (B, out)
    outputs: Tuple[np.ndarray, ...]  # activation of each layer, (B, out)
    single: bool  # True when forward was called with a 1-D vector


@dataclass
class GradientBundle:
    """
    Gradients mirroring a network's parameters, plus the gradient with respect to the input.

    Attributes:
        weights (List[np.ndarray]): One (out, in) matrix per layer.
        biases (List[np.ndarray]): One vector per layer.
        d_input (np.ndarray): Input gradient, shaped like the forward input.
    """

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    d_input: np.ndarray

    def parameters(self) -> List[np.ndarray]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def scaled(self, factor: float) -> "GradientBundle":
        return GradientBundle(
            weights=[w * factor for w in self.weights],
            biases=[b * factor for b in self.biases],
            d_input=self.d_input * factor,
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())


@dataclass
class AdamState:
    """
    Adam optimizer state. ``m`` and ``v`` mirror the network parameters.
    """

    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_network(cls, net: DenseNetwork, lr: float = 1e-3, **kwargs) -> "AdamState":
        zeros = [np.zeros_like(p) for p in net.parameters()]
        return cls(m=zeros, v=[np.zeros_like(p) for p in zeros], lr=lr, **kwargs)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "softplus":
        return np.logaddexp(0.0, z)
    if activation == "softmax":
        return _softmax(z)
    return z


def _activation_backward(
    z: np.ndarray, out: np.ndarray, d_out: np.ndarray, activation: str
) -> np.ndarray:
    if activation == "relu":
        # subgradient at 0 is 0
        return d_out * (z > 0)
    if activation == "softplus":
        return d_out * expit(z)
    if activation == "softmax":
        return out * (d_out - np.sum(d_out * out, axis=-1, keepdims=True))
    return d_out


def init_network(
    input_dim: int, layer_spec: Sequence[Tuple[int, str]], seed: int
) -> DenseNetwork:
    """
    Builds a network with Glorot-uniform weights and zero biases.

    Args:
        input_dim (int): Input length.
        layer_spec (Sequence[Tuple[int, str]]): (size, activation) per layer, input to output.
        seed (int): Seed of the weight generator.

    Returns:
        DenseNetwork: The initialized network; identical for identical arguments.

    Raises:
        ConfigError: If the spec is empty or a size is not positive.

    Example:
        >>> net = init_network(3, [(20, "relu"), (1, "softplus")], seed=0)
        >>> net.output_dim
        1
    """
    if not layer_spec:
        raise ConfigError("network spec must contain at least one layer")
    if input_dim < 1:
        raise ConfigError(f"input_dim must be positive, got {input_dim}")
    rng = np.random.default_rng(seed)
    layers = []
    fan_in = input_dim
    for size, activation in layer_spec:
        if size < 1:
            raise ConfigError(f"layer sizes must be positive, got {size}")
        bound = np.sqrt(6.0 / (fan_in + size))
        weights = rng.uniform(-bound, bound, size=(size, fan_in))
        layers.append(DenseLayer(weights=weights, bias=np.zeros(size), activation=activation))
        fan_in = size
    net = DenseNetwork(layers=tuple(layers), input_dim=input_dim, seed=seed)
    logger.debug(
        f"Initialized network {input_dim} -> {[s for s, _ in layer_spec]} "
        f"({net.num_parameters()} parameters, seed={seed})."
    )
    return net


def forward(net: DenseNetwork, x: Union[Sequence[float], np.ndarray]) -> Tuple[np.ndarray, Tape]:
    """
    Evaluates the network.

    Args:
        net (DenseNetwork): The network.
        x (Union[Sequence[float], np.ndarray]): One input vector, or a (B, input_dim) batch.

    Returns:
        Tuple[np.ndarray, Tape]: Output (vector or (B, out) batch) and the tape for :func:`backward`.

    Raises:
        ShapeError: If the input length differs from ``input_dim``.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError(f"network expects inputs of length {net.input_dim}, got shape {arr.shape}")

    inputs, pre, outs = [], [], []
    h = batch
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weights.T + layer.bias
        h = _activate(z, layer.activation)
        pre.append(z)
        outs.append(h)
    tape = Tape(tuple(inputs), tuple(pre), tuple(outs), single)
    return (h[0] if single else h), tape


def backward(net: DenseNetwork, tape: Tape, d_output: Union[Sequence[float], np.ndarray]) -> GradientBundle:
    """
    Reverse-mode gradients of ``sum(output * d_output)``.

    For a batch the parameter gradients are summed over rows.

    Args:
        net (DenseNetwork): The network used in the forward call.
        tape (Tape): Tape from :func:`forward`.
        d_output (Union[Sequence[float], np.ndarray]): Upstream gradient shaped like the output.

    Returns:
        GradientBundle: Gradients for every parameter and for the input.

    Raises:
        ShapeError: If the tape or ``d_output`` does not match the network.
    """
    if len(tape.inputs) != len(net.layers) or any(
        inp.shape[1] != layer.cols for inp, layer in zip(tape.inputs, net.layers)
    ):
        raise ShapeError("tape does not belong to this network")
    d_out = np.asarray(d_output, dtype=float)
    if tape.single:
        d_out = d_out[None, :] if d_out.ndim == 1 else d_out
    if d_out.shape != tape.outputs[-1].shape:
        raise ShapeError(
            f"d_output shape {np.asarray(d_output).shape} does not match output shape {tape.outputs[-1].shape}"
        )

    d_weights: List[np.ndarray] = [None] * len(net.layers)
    d_biases: List[np.ndarray] = [None] * len(net.layers)
    grad = d_out
    for index in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[index]
        dz = _activation_backward(tape.pre_activations[index], tape.outputs[index], grad, layer.activation)
        d_weights[index] = dz.T @ tape.inputs[index]
        d_biases[index] = dz.sum(axis=0)
        grad = dz @ layer.weights
    d_input = grad[0] if tape.single else grad
    return GradientBundle(weights=d_weights, biases=d_biases, d_input=d_input)


def adam_step(
    net: DenseNetwork, grads: GradientBundle, state: AdamState
) -> Tuple[DenseNetwork, AdamState]:
    """
    Applies one bias-corrected Adam update.

    Args:
        net (DenseNetwork): Current network (left untouched).
        grads (GradientBundle): Gradients mirroring the network.
        state (AdamState): Optimizer state; updated in place and returned.

    Returns:
        Tuple[DenseNetwork, AdamState]: The updated network and state.

    Raises:
        ShapeError: If gradient shapes do not mirror the parameters.
    """
    params = net.parameters()
    g_params = grads.parameters()
    if len(params) != len(g_params) or any(p.shape != g.shape for p, g in zip(params, g_params)):
        raise ShapeError("gradient shapes do not mirror the network parameters")

    state.t += 1
    correction1 = 1.0 - state.beta1**state.t
    correction2 = 1.0 - state.beta2**state.t
    updated = []
    for i, (p, g) in enumerate(zip(params, g_params)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        updated.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return net.with_parameters(updated), state


def network_to_dict(net: DenseNetwork) -> Dict[str, Any]:
    """Converts a network to its JSON document (weights row-major)."""
    return {
        "input_dim": net.input_dim,
        "layers": [
            {
                "rows": layer.rows,
                "cols": layer.cols,
                "activation": layer.activation,
                "weights": layer.weights.ravel().tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in net.layers
        ],
        "seed": net.seed,
    }


def network_from_dict(document: Dict[str, Any]) -> DenseNetwork:
    """
    Builds a network from its JSON document.

    Raises:
        ShapeError: If a weight list does not have rows * cols entries.
        ConfigError: If a required key is missing.
    """
    try:
        layers = []
        for entry in document["layers"]:
            rows, cols = int(entry["rows"]), int(entry["cols"])
            weights = np.asarray(entry["weights"], dtype=float)
            if weights.size != rows * cols:
                raise ShapeError(f"layer has {weights.size} weights, expected {rows}x{cols}")
            layers.append(
                DenseLayer(
                    weights=weights.reshape(rows, cols),
                    bias=np.asarray(entry["bias"], dtype=float),
                    activation=entry["activation"],
                )
            )
        return DenseNetwork(
            layers=tuple(layers), input_dim=int(document["input_dim"]), seed=document.get("seed")
        )
    except KeyError as e:
        raise ConfigError(f"network document is missing key {e}") from e


def save_network(net: DenseNetwork, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Writes the network JSON document, optionally extended with ``extra`` top-level keys.

    Returns:
        Path: The written file.
    """
    document = network_to_dict(net)
    if extra:
        document.update(extra)
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8") as f:
            json.dump(document, f, indent=1)
            f.write("\n")
    except OSError as e:
        logger.error(f"Failed to write network file '{target}': {e}")
        raise ConfigError(f"Failed to write network file '{target}': {e}") from e
    logger.info(f"Network saved to '{target}'.")
    return target


def load_network(path: Union[str, Path]) -> Tuple[DenseNetwork, Dict[str, Any]]:
    """
    Reads a network JSON document.

    Returns:
        Tuple[DenseNetwork, Dict[str, Any]]: The network and the raw document (for extra keys).

    Raises:
        ConfigError: If the file cannot be read.
        ParseError: If the file is not valid JSON.
    """
    source = Path(path)
    try:
        with source.open("r", encoding="utf-8") as f:
            document = json.load(f)
    except OSError as e:
        raise ConfigError(f"Failed to read network file '{source}': {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, str(source), e.lineno) from e
    return network_from_dict(document), document
