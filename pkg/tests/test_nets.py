"""Dense-net toolkit: forward/backward correctness, Adam, embeddings, IO."""

import numpy as np
import pytest

from hiaudit.nets import (
    DenseNet,
    TrainingDivergence,
    adam_from_dict,
    adam_init,
    adam_step,
    adam_to_dict,
    backward,
    forward,
    init_dense,
    net_from_dict,
    net_to_dict,
    sinusoidal_embed,
    zero_tape,
)


def random_net(rng, dims=(4, 6, 5, 3), activations=("mish", "tanh", "identity")):
    return init_dense(dims, activations, rng)


def loss_of(net, x, weight):
    out, _ = forward(net, x)
    return float((out * weight).sum())


def fd_grad(net, x, weight, layer, index, h=1e-6, kind="w"):
    params = net.weights[layer] if kind == "w" else net.biases[layer]
    orig = params[index]
    params[index] = orig + h
    f_plus = loss_of(net, x, weight)
    params[index] = orig - h
    f_minus = loss_of(net, x, weight)
    params[index] = orig
    return (f_plus - f_minus) / (2 * h)


# --- forward -----------------------------------------------------------------


def test_identity_layer_passes_input_through():
    net = DenseNet(weights=[np.eye(3)], biases=[np.zeros(3)], activations=["identity"])
    x = np.array([1.5, -2.0, 0.25])
    out, _ = forward(net, x)
    np.testing.assert_array_equal(out, x)


def test_mish_at_zero_is_zero():
    net = DenseNet(weights=[np.eye(1)], biases=[np.zeros(1)], activations=["mish"])
    out, _ = forward(net, np.array([0.0]))
    assert out[0] == 0.0


def test_tanh_layer_saturates():
    rng = np.random.default_rng(0)
    net = init_dense((4, 8), ["tanh"], rng)
    out, _ = forward(net, rng.normal(size=(16, 4)) * 10)
    assert (np.abs(out) <= 1.0).all()


def test_forward_rejects_bad_shapes():
    net = random_net(np.random.default_rng(0))
    with pytest.raises(ValueError):
        forward(net, np.zeros(5))


# --- backward ----------------------------------------------------------------


def test_backward_matches_central_differences():
    rng = np.random.default_rng(42)
    net = random_net(rng)
    x = rng.normal(size=(7, 4))
    weight = rng.normal(size=(7, 3))
    _, cache = forward(net, x)
    tape = backward(net, cache, weight)
    checks = 0
    for layer in range(3):
        for index in [(0, 0), (1, 2), tuple(rng.integers(0, s) for s in net.weights[layer].shape)]:
            fd = fd_grad(net, x, weight, layer, index, kind="w")
            an = tape.d_weights[layer][index]
            assert abs(an - fd) <= 1e-4 * max(abs(an), abs(fd), 1e-3)
            checks += 1
        bi = int(rng.integers(0, net.biases[layer].shape[0]))
        fd = fd_grad(net, x, weight, layer, (bi,), kind="b")
        assert abs(tape.d_biases[layer][bi] - fd) <= 1e-4 * max(abs(fd), 1e-3)
    assert checks == 9


def test_backward_input_gradient_matches_fd():
    rng = np.random.default_rng(3)
    net = random_net(rng)
    x = rng.normal(size=(2, 4))
    weight = rng.normal(size=(2, 3))
    _, cache = forward(net, x)
    tape = backward(net, cache, weight)
    h = 1e-6
    for i, j in [(0, 0), (1, 3)]:
        xp = x.copy()
        xp[i, j] += h
        xm = x.copy()
        xm[i, j] -= h
        fd = (loss_of(net, xp, weight) - loss_of(net, xm, weight)) / (2 * h)
        assert abs(tape.d_input[i, j] - fd) <= 1e-4 * max(abs(fd), 1e-3)


def test_zero_output_grad_gives_zero_tape():
    rng = np.random.default_rng(1)
    net = random_net(rng)
    x = rng.normal(size=(3, 4))
    _, cache = forward(net, x)
    tape = backward(net, cache, np.zeros((3, 3)))
    for dw in tape.d_weights:
        assert (dw == 0).all()
    for db in tape.d_biases:
        assert (db == 0).all()


def test_linear_net_weight_gradient_is_input():
    net = DenseNet(weights=[np.array([[2.0]])], biases=[np.zeros(1)], activations=["identity"])
    x = np.array([[3.0]])
    _, cache = forward(net, x)
    tape = backward(net, cache, np.array([[1.0]]))
    assert tape.d_weights[0][0, 0] == 3.0


def test_backward_rejects_foreign_cache():
    rng = np.random.default_rng(0)
    net_a = random_net(rng)
    net_b = random_net(rng)
    _, cache = forward(net_a, rng.normal(size=(2, 4)))
    with pytest.raises(RuntimeError):
        backward(net_b, cache, np.zeros((2, 3)))


# --- adam ----------------------------------------------------------------------


def test_adam_zero_gradient_keeps_parameters():
    rng = np.random.default_rng(2)
    net = random_net(rng)
    before = [w.copy() for w in net.weights]
    state = adam_init(net, lr=1e-3)
    adam_step(net, zero_tape(net), state)
    for w, b in zip(net.weights, before):
        np.testing.assert_array_equal(w, b)
    assert state.step == 1


def test_adam_descends_against_constant_gradient():
    net = DenseNet(weights=[np.array([[0.0]])], biases=[np.zeros(1)], activations=["identity"])
    state = adam_init(net, lr=1e-2)
    tape = zero_tape(net)
    tape.d_weights[0][0, 0] = 1.0  # positive gradient: parameter must fall
    for _ in range(100):
        adam_step(net, tape, state)
    assert net.weights[0][0, 0] < -0.5


def test_adam_zero_lr_freezes_parameters():
    rng = np.random.default_rng(4)
    net = random_net(rng)
    before = [w.copy() for w in net.weights]
    state = adam_init(net, lr=0.0)
    tape = zero_tape(net)
    for dw in tape.d_weights:
        dw += 1.0
    adam_step(net, tape, state)
    for w, b in zip(net.weights, before):
        np.testing.assert_array_equal(w, b)


def test_adam_rejects_nan_gradient():
    rng = np.random.default_rng(5)
    net = random_net(rng)
    state = adam_init(net, lr=1e-3)
    tape = zero_tape(net)
    tape.d_weights[0][0, 0] = np.nan
    with pytest.raises(TrainingDivergence):
        adam_step(net, tape, state)


# --- embeddings ------------------------------------------------------------------


def test_sinusoidal_embed_step_zero_pattern():
    emb = sinusoidal_embed(0, 8)
    np.testing.assert_array_equal(emb, [0, 1, 0, 1, 0, 1, 0, 1])


def test_sinusoidal_embed_bounded():
    for step in range(10):
        emb = sinusoidal_embed(step, 16)
        assert (np.abs(emb) <= 1.0).all()


def test_sinusoidal_embed_distinct_steps():
    embs = [tuple(sinusoidal_embed(step, 4)) for step in range(1, 6)]
    assert len(set(embs)) == 5


def test_sinusoidal_embed_rejects_odd_dim():
    with pytest.raises(ValueError):
        sinusoidal_embed(1, 3)


# --- determinism / io -------------------------------------------------------------


def test_init_is_seed_deterministic():
    a = random_net(np.random.default_rng(99))
    b = random_net(np.random.default_rng(99))
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)


def test_net_roundtrips_through_dict():
    rng = np.random.default_rng(6)
    net = random_net(rng)
    restored = net_from_dict(net_to_dict(net))
    assert restored.activations == net.activations
    for wa, wb in zip(net.weights, restored.weights):
        np.testing.assert_array_equal(wa, wb)
    for ba, bb in zip(net.biases, restored.biases):
        np.testing.assert_array_equal(ba, bb)


def test_adam_state_roundtrips_through_dict():
    rng = np.random.default_rng(7)
    net = random_net(rng)
    state = adam_init(net, lr=1e-3)
    tape = zero_tape(net)
    tape.d_weights[0][0, 0] = 0.5
    adam_step(net, tape, state)
    restored = adam_from_dict(adam_to_dict(state))
    assert restored.step == state.step
    np.testing.assert_array_equal(restored.m_w[0], state.m_w[0])
    np.testing.assert_array_equal(restored.v_w[0], state.v_w[0])
