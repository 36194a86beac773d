# tests/test_nnet.py

import json

import numpy as np
import pytest

from dirichlet_wrapper.errors import ConfigError, ParseError, ShapeError
from dirichlet_wrapper.nnet import (
    AdamState,
    DenseLayer,
    DenseNetwork,
    GradientBundle,
    adam_step,
    backward,
    forward,
    init_network,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
)


def _single_layer(weight, bias, activation):
    layer = DenseLayer(np.array([[weight]], dtype=float), np.array([bias], dtype=float), activation)
    return DenseNetwork(layers=(layer,), input_dim=1)


# 1. Construction


def test_network_rejects_broken_chain():
    first = DenseLayer(np.zeros((4, 3)), np.zeros(4), "relu")
    second = DenseLayer(np.zeros((2, 5)), np.zeros(2), "identity")
    with pytest.raises(ShapeError):
        DenseNetwork(layers=(first, second), input_dim=3)


def test_network_rejects_inner_softmax():
    first = DenseLayer(np.zeros((4, 3)), np.zeros(4), "softmax")
    second = DenseLayer(np.zeros((2, 4)), np.zeros(2), "identity")
    with pytest.raises(ConfigError):
        DenseNetwork(layers=(first, second), input_dim=3)


def test_init_network_deterministic_and_bounded():
    spec = [(20, "relu"), (20, "relu"), (1, "softplus")]
    first = init_network(20, spec, seed=3)
    second = init_network(20, spec, seed=3)
    other = init_network(20, spec, seed=4)

    for a, b in zip(first.parameters(), second.parameters()):
        assert np.array_equal(a, b)
    assert any(not np.array_equal(a, b) for a, b in zip(first.parameters(), other.parameters()))
    assert np.all(np.abs(first.layers[1].weights) <= np.sqrt(6.0 / 40.0))
    assert np.all(first.layers[0].bias == 0)
    assert first.num_parameters() == 20 * 20 + 20 + 20 * 20 + 20 + 20 + 1


def test_init_network_empty_spec():
    with pytest.raises(ConfigError):
        init_network(3, [], seed=0)


# 2. Forward


def test_forward_zero_network_outputs_zero():
    layers = (
        DenseLayer(np.zeros((5, 3)), np.zeros(5), "relu"),
        DenseLayer(np.zeros((2, 5)), np.zeros(2), "identity"),
    )
    out, _ = forward(DenseNetwork(layers=layers, input_dim=3), [1.0, -2.0, 3.0])
    assert np.array_equal(out, np.zeros(2))


def test_forward_affine_and_softplus():
    out, _ = forward(_single_layer(2.0, 1.0, "identity"), [3.0])
    assert out.tolist() == [7.0]
    out, _ = forward(_single_layer(0.0, 0.0, "softplus"), [5.0])
    assert out[0] == pytest.approx(np.log(2.0))


def test_forward_batch_matches_rows(rng):
    net = init_network(4, [(6, "relu"), (3, "softmax")], seed=1)
    x = rng.normal(size=(5, 4))
    batch_out, _ = forward(net, x)
    for i in range(5):
        row_out, _ = forward(net, x[i])
        np.testing.assert_allclose(batch_out[i], row_out, rtol=1e-15)
    np.testing.assert_allclose(batch_out.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(batch_out >= 0)


def test_forward_shape_mismatch():
    net = init_network(3, [(2, "relu")], seed=0)
    with pytest.raises(ShapeError):
        forward(net, [1.0, 2.0])


# 3. Backward


def test_backward_linear_layer():
    net = _single_layer(2.0, 1.0, "identity")
    _, tape = forward(net, [3.0])
    grads = backward(net, tape, [1.0])
    assert grads.weights[0].tolist() == [[3.0]]
    assert grads.biases[0].tolist() == [1.0]
    assert grads.d_input.tolist() == [2.0]


def test_backward_zero_upstream():
    net = init_network(3, [(4, "relu"), (2, "identity")], seed=0)
    _, tape = forward(net, [0.5, -0.2, 1.0])
    grads = backward(net, tape, np.zeros(2))
    assert all(np.all(p == 0) for p in grads.parameters())
    assert np.all(grads.d_input == 0)


def test_backward_matches_finite_differences(rng):
    """
    A 4x20 ReLU stack: every parameter gradient matches a central difference (step 1e-5).
    """
    net = init_network(3, [(20, "relu")] * 4 + [(2, "identity")], seed=11)
    x = rng.normal(size=(3, 3))
    d_output = rng.normal(size=(3, 2))
    _, tape = forward(net, x)
    grads = backward(net, tape, d_output)

    def objective(candidate):
        out, _ = forward(candidate, x)
        return float(np.sum(out * d_output))

    params = net.parameters()
    step = 1e-5
    for index, (param, grad) in enumerate(zip(params, grads.parameters())):
        for flat in range(param.size):
            plus = [p.copy() for p in params]
            minus = [p.copy() for p in params]
            plus[index].ravel()[flat] += step
            minus[index].ravel()[flat] -= step
            numeric = (objective(net.with_parameters(plus)) - objective(net.with_parameters(minus))) / (2 * step)
            analytic = grad.ravel()[flat]
            assert abs(analytic - numeric) <= 1e-6 * max(abs(numeric), abs(analytic)) + 1e-8


def test_backward_input_gradient_softmax(rng):
    net = init_network(4, [(5, "softplus"), (3, "softmax")], seed=2)
    x = rng.normal(size=4)
    d_output = rng.normal(size=3)
    _, tape = forward(net, x)
    grads = backward(net, tape, d_output)
    step = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = step
        numeric = (forward(net, x + e)[0] @ d_output - forward(net, x - e)[0] @ d_output) / (2 * step)
        assert grads.d_input[j] == pytest.approx(numeric, rel=1e-6, abs=1e-9)


def test_backward_rejects_foreign_tape():
    net = init_network(3, [(4, "relu")], seed=0)
    other = init_network(5, [(4, "relu")], seed=0)
    _, tape = forward(other, np.ones(5))
    with pytest.raises(ShapeError):
        backward(net, tape, np.ones(4))


# 4. Adam


def test_adam_zero_gradient_keeps_parameters():
    net = init_network(2, [(3, "relu"), (1, "identity")], seed=0)
    state = AdamState.for_network(net)
    zeros = GradientBundle(
        weights=[np.zeros_like(l.weights) for l in net.layers],
        biases=[np.zeros_like(l.bias) for l in net.layers],
        d_input=np.zeros(2),
    )
    updated, state = adam_step(net, zeros, state)
    assert state.t == 1
    for a, b in zip(net.parameters(), updated.parameters()):
        assert np.array_equal(a, b)


def test_adam_first_step_scalar():
    net = _single_layer(0.0, 0.0, "identity")
    state = AdamState.for_network(net, lr=1e-3)
    grads = GradientBundle(weights=[np.array([[0.5]])], biases=[np.array([0.0])], d_input=np.zeros(1))
    updated, _ = adam_step(net, grads, state)
    assert updated.layers[0].weights[0, 0] == pytest.approx(-9.99999980e-4, rel=1e-8)


def test_adam_repeated_gradient_does_not_grow_update():
    net = _single_layer(0.0, 0.0, "identity")
    state = AdamState.for_network(net, lr=1e-3)
    grads = GradientBundle(weights=[np.array([[0.5]])], biases=[np.array([0.0])], d_input=np.zeros(1))
    once, state = adam_step(net, grads, state)
    twice, state = adam_step(once, grads, state)
    first = abs(once.layers[0].weights[0, 0])
    second = abs(twice.layers[0].weights[0, 0] - once.layers[0].weights[0, 0])
    assert second <= first + 1e-12


def test_adam_shape_mismatch():
    net = init_network(2, [(3, "relu")], seed=0)
    state = AdamState.for_network(net)
    bad = GradientBundle(weights=[np.zeros((2, 2))], biases=[np.zeros(3)], d_input=np.zeros(2))
    with pytest.raises(ShapeError):
        adam_step(net, bad, state)


# 5. Serialization


def test_save_and_load_network(tmp_path):
    net = init_network(3, [(4, "relu"), (1, "softplus")], seed=5)
    path = save_network(net, tmp_path / "net.json", extra={"note": "kept"})
    loaded, document = load_network(path)

    assert document["note"] == "kept"
    assert loaded.input_dim == 3
    for a, b in zip(net.parameters(), loaded.parameters()):
        assert np.array_equal(a, b)
    assert [l.activation for l in loaded.layers] == ["relu", "softplus"]


def test_network_document_layout():
    net = init_network(2, [(3, "identity")], seed=1)
    document = network_to_dict(net)
    assert set(document) == {"input_dim", "layers", "seed"}
    assert set(document["layers"][0]) == {"rows", "cols", "activation", "weights", "bias"}
    assert document["layers"][0]["weights"] == net.layers[0].weights.ravel().tolist()


def test_network_from_dict_wrong_weight_count():
    document = network_to_dict(init_network(2, [(3, "identity")], seed=1))
    document["layers"][0]["weights"] = document["layers"][0]["weights"][:-1]
    with pytest.raises(ShapeError):
        network_from_dict(document)


def test_load_network_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"input_dim": 2,\n "layers": [', encoding="utf-8")
    with pytest.raises(ParseError):
        load_network(path)


def test_load_network_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_network(tmp_path / "absent.json")


def test_saved_document_is_plain_json(tmp_path):
    net = init_network(2, [(2, "softmax")], seed=0)
    path = save_network(net, tmp_path / "n.json")
    assert json.loads(path.read_text(encoding="utf-8"))["input_dim"] == 2
