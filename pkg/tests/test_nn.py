import numpy as np
import pytest

from reconxfer.errors import ConfigurationError, ShapeError, StaleTapeError
from reconxfer.nn import (
    LINEAR,
    RELU,
    SIGMOID,
    adam_step,
    backward,
    forward,
    freeze_all,
    init_adam,
    init_mlp,
    load_mlp,
    parameter_checksum,
    parameter_count,
    save_mlp,
    set_frozen,
)


def small_net(seed=7, acts=(RELU, RELU, LINEAR)):
    return init_mlp([6, 5, 4, 3], list(acts), seed)


# ---------------------------------------------------------------------------
# init


def test_init_deterministic():
    a = init_mlp([100, 50, 25], [RELU, SIGMOID], 7)
    b = init_mlp([100, 50, 25], [RELU, SIGMOID], 7)
    for la, lb in zip(a.layers, b.layers):
        assert la.weights.tobytes() == lb.weights.tobytes()
        assert la.biases.tobytes() == lb.biases.tobytes()


def test_init_seed_changes_weights():
    a = init_mlp([10, 5, 1], [RELU, LINEAR], 1)
    b = init_mlp([10, 5, 1], [RELU, LINEAR], 2)
    assert not np.allclose(a.layers[0].weights, b.layers[0].weights)


def test_parameter_count_closed_form():
    # sum of out*in + out over consecutive dims
    model = init_mlp([100, 50, 25, 10, 1], [RELU, RELU, RELU, SIGMOID], 3)
    expected = (100 * 50 + 50) + (50 * 25 + 25) + (25 * 10 + 10) + (10 * 1 + 1)
    assert expected == 6596
    assert parameter_count(model) == expected


def test_init_rejects_degenerate_dims():
    with pytest.raises(ConfigurationError):
        init_mlp([100], [], 0)
    with pytest.raises(ConfigurationError):
        init_mlp([10, 0], [RELU], 0)
    with pytest.raises(ConfigurationError):
        init_mlp([10, 5], [RELU, RELU], 0)


def test_biases_zero_and_fanin_bound():
    model = init_mlp([64, 32, 8], [RELU, LINEAR], 11)
    for layer in model.layers:
        assert np.all(layer.biases == 0.0)
        assert np.abs(layer.weights).max() <= np.sqrt(6.0 / layer.in_dim)


# ---------------------------------------------------------------------------
# forward


def test_forward_zero_weights_sigmoid_gives_half():
    model = init_mlp([10, 4, 2], [RELU, SIGMOID], 0)
    for layer in model.layers:
        layer.weights[...] = 0.0
    out, _ = forward(model, np.ones(10))
    assert np.allclose(out, 0.5)


def test_forward_zero_weights_relu_linear_gives_zero():
    model = init_mlp([10, 4, 2], [RELU, LINEAR], 0)
    for layer in model.layers:
        layer.weights[...] = 0.0
    out, _ = forward(model, np.ones(10))
    assert np.all(out == 0.0)


def test_forward_matches_hand_rolled_evaluation():
    model = small_net(seed=123, acts=(RELU, SIGMOID, LINEAR))
    rng = np.random.default_rng(5)
    x = rng.normal(size=6)
    # independent evaluation with explicit matrix algebra
    a = x
    for layer in model.layers:
        z = layer.weights @ a + layer.biases
        if layer.activation == RELU:
            a = np.maximum(z, 0.0)
        elif layer.activation == SIGMOID:
            a = 1.0 / (1.0 + np.exp(-z))
        else:
            a = z
    out, _ = forward(model, x)
    assert np.allclose(out, a, atol=1e-12, rtol=0)


def test_forward_batch_matches_loop():
    model = small_net(seed=9)
    rng = np.random.default_rng(0)
    xs = rng.normal(size=(7, 6))
    batch_out, _ = forward(model, xs)
    for i in range(7):
        single, _ = forward(model, xs[i])
        assert np.allclose(single, batch_out[i], atol=1e-12)


def test_forward_shape_error():
    model = small_net()
    with pytest.raises(ShapeError):
        forward(model, np.zeros(5))


# ---------------------------------------------------------------------------
# backward


def loss_and_grads(model, x):
    out, tape = forward(model, x)
    # scalarize multi-output nets with fixed mixing weights
    mix = np.arange(1.0, out.shape[-1] + 1.0)
    loss = float(out @ mix) if out.ndim == 1 else float(out @ mix).sum()
    grads = backward(model, tape, np.broadcast_to(mix, out.shape).copy())
    return loss, grads


@pytest.mark.parametrize("acts", [
    (RELU, RELU, LINEAR),
    (RELU, SIGMOID, SIGMOID),
    (SIGMOID, RELU, LINEAR),
    (LINEAR, LINEAR, LINEAR),
])
def test_gradients_match_central_finite_differences(acts):
    model = small_net(seed=31, acts=acts)
    rng = np.random.default_rng(77)
    x = rng.normal(size=6) * 0.7
    _, grads = loss_and_grads(model, x)
    h = 1e-5
    checked = 0
    for k, layer in enumerate(model.layers):
        coords = [(rng.integers(layer.out_dim), rng.integers(layer.in_dim))
                  for _ in range(12)]
        for (i, j) in coords:
            orig = layer.weights[i, j]
            layer.weights[i, j] = orig + h
            model.version += 1
            up, _ = loss_and_grads(model, x)
            layer.weights[i, j] = orig - h
            model.version += 1
            dn, _ = loss_and_grads(model, x)
            layer.weights[i, j] = orig
            model.version += 1
            fd = (up - dn) / (2 * h)
            an = grads.weights[k][i, j]
            assert an == pytest.approx(fd, rel=1e-5, abs=1e-9)
            checked += 1
        for i in [0, layer.out_dim - 1]:
            orig = layer.biases[i]
            layer.biases[i] = orig + h
            model.version += 1
            up, _ = loss_and_grads(model, x)
            layer.biases[i] = orig - h
            model.version += 1
            dn, _ = loss_and_grads(model, x)
            layer.biases[i] = orig
            model.version += 1
            fd = (up - dn) / (2 * h)
            assert grads.biases[k][i] == pytest.approx(fd, rel=1e-5, abs=1e-9)
            checked += 1
    assert checked >= 40


def test_backward_zero_output_grad_gives_zero_grads():
    model = small_net()
    out, tape = forward(model, np.ones(6))
    grads = backward(model, tape, np.zeros_like(out))
    for gw, gb in zip(grads.weights, grads.biases):
        assert np.all(gw == 0.0)
        assert np.all(gb == 0.0)


def test_backward_two_linear_layers_outer_product_chain():
    # y = W2 (W1 x + b1) + b2 with identity activations:
    # dL/dW2 = g a1^T, dL/dW1 = (W2^T g) x^T
    model = init_mlp([2, 2, 2], [LINEAR, LINEAR], 0)
    w1 = np.array([[1.0, 2.0], [3.0, -1.0]])
    w2 = np.array([[0.5, -2.0], [1.5, 1.0]])
    model.layers[0].weights[...] = w1
    model.layers[1].weights[...] = w2
    x = np.array([1.0, -2.0])
    g = np.array([2.0, -1.0])
    out, tape = forward(model, x)
    grads = backward(model, tape, g)
    a1 = w1 @ x
    assert np.allclose(grads.weights[1], np.outer(g, a1), atol=1e-12)
    assert np.allclose(grads.weights[0], np.outer(w2.T @ g, x), atol=1e-12)
    assert np.allclose(grads.input_grad, w1.T @ (w2.T @ g), atol=1e-12)


def test_backward_rejects_stale_tape():
    model = small_net()
    out, tape = forward(model, np.ones(6))
    state = init_adam(model, lr=0.1)
    grads = backward(model, tape, np.ones_like(out))
    adam_step(model, grads, state)
    with pytest.raises(StaleTapeError):
        backward(model, tape, np.ones_like(out))


# ---------------------------------------------------------------------------
# adam


def test_adam_first_step_hand_computed():
    # single scalar parameter, g=1, lr=0.1: bias-corrected step is
    # -lr * 1 / (1 + eps) ~ -0.1
    model = init_mlp([1, 1], [LINEAR], 0)
    model.layers[0].weights[...] = 0.0
    state = init_adam(model, lr=0.1)
    out, tape = forward(model, np.ones(1))
    grads = backward(model, tape, np.ones(1))
    assert grads.weights[0][0, 0] == 1.0
    adam_step(model, grads, state)
    assert model.layers[0].weights[0, 0] == pytest.approx(-0.1, rel=1e-7)
    assert state.step == 1


def test_adam_zero_gradients_leave_parameters():
    model = small_net(seed=3)
    before = parameter_checksum(model)
    state = init_adam(model, lr=1e-2)
    out, tape = forward(model, np.ones(6))
    grads = backward(model, tape, np.zeros_like(out))
    for _ in range(5):
        adam_step(model, grads, state)
    assert parameter_checksum(model) == before
    assert state.step == 5


def test_adam_frozen_model_bitwise_unchanged():
    model = small_net(seed=4)
    freeze_all(model)
    before = parameter_checksum(model)
    state = init_adam(model, lr=0.5)
    out, tape = forward(model, np.ones(6))
    grads = backward(model, tape, np.ones_like(out))
    for _ in range(100):
        adam_step(model, grads, state)
    assert parameter_checksum(model) == before


def test_freeze_range_then_unfreeze_resumes_updates():
    # linear activations so gradients can never die on the way down
    model = small_net(seed=5, acts=(LINEAR, LINEAR, LINEAR))
    set_frozen(model, range(0, 2), True)
    frozen_bytes = [model.layers[k].weights.tobytes() for k in range(2)]
    state = init_adam(model, lr=1e-2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        out, tape = forward(model, rng.normal(size=6))
        grads = backward(model, tape, np.ones_like(out))
        adam_step(model, grads, state)
    assert [model.layers[k].weights.tobytes() for k in range(2)] == frozen_bytes
    assert not np.allclose(
        model.layers[2].weights,
        init_mlp([6, 5, 4, 3], [LINEAR, LINEAR, LINEAR], 5).layers[2].weights)
    set_frozen(model, range(0, 2), False)
    out, tape = forward(model, np.ones(6))
    grads = backward(model, tape, np.ones_like(out))
    adam_step(model, grads, state)
    assert model.layers[0].weights.tobytes() != frozen_bytes[0]


def test_set_frozen_out_of_range():
    model = small_net()
    with pytest.raises(ConfigurationError):
        set_frozen(model, [3], True)


def test_training_determinism_same_seed_same_parameters():
    def run():
        model = init_mlp([8, 6, 2], [RELU, LINEAR], 42)
        state = init_adam(model, lr=1e-3)
        rng = np.random.default_rng(1)
        xs = rng.normal(size=(50, 8))
        for x in xs:
            out, tape = forward(model, x)
            grads = backward(model, tape, out - 1.0)
            adam_step(model, grads, state)
        return parameter_checksum(model)

    assert run() == run()


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_roundtrip(tmp_path):
    model = small_net(seed=8, acts=(RELU, SIGMOID, LINEAR))
    set_frozen(model, [1], True)
    path = tmp_path / "model.rtlm"
    save_mlp(path, model)
    loaded = load_mlp(path)
    assert [l.activation for l in loaded.layers] == [l.activation for l in model.layers]
    assert loaded.frozen.tolist() == model.frozen.tolist()
    assert parameter_checksum(loaded) == parameter_checksum(model)
    with open(path, "rb") as fh:
        assert fh.read(4) == b"RTLM"


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.rtlm"
    path.write_bytes(b"nope" + b"\x00" * 16)
    from reconxfer.errors import DataError

    with pytest.raises(DataError):
        load_mlp(path)
