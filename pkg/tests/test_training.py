"""Trainer pieces: replay, objectives, targets, soft updates, the loop."""

import math

import numpy as np
import pytest

from hiaudit.env import EnvConfig
from hiaudit.nets import init_dense
from hiaudit.training import (
    CriticPair,
    ReplayMemory,
    TrainerConfig,
    Transition,
    actor_loss_and_grads,
    actor_objective,
    critic_loss_and_grads,
    critic_min,
    entropy,
    make_actor,
    make_critics,
    soft_update,
    td_target,
    train,
)


def transition(i, n=1):
    h = 2**n
    b = np.full(h, 1.0 / h)
    return Transition(belief=b, action=i % h, next_belief=b, reward=float(i), done=False)


# --- replay -------------------------------------------------------------------


def test_replay_fifo_eviction():
    mem = ReplayMemory(capacity=5)
    items = [transition(i) for i in range(8)]
    for t in items:
        mem.push(t)
    assert len(mem) == 5
    for old in items[:3]:
        assert old not in mem
    for kept in items[3:]:
        assert kept in mem


def test_replay_sampling_without_replacement():
    mem = ReplayMemory(capacity=10)
    for i in range(10):
        mem.push(transition(i))
    batch = mem.sample(np.random.default_rng(0), 10)
    assert len({id(t) for t in batch}) == 10
    with pytest.raises(ValueError):
        ReplayMemory(3).sample(np.random.default_rng(0), 1)


# --- config -------------------------------------------------------------------


def test_trainer_config_validation():
    for kwargs in (
        dict(gamma=1.0),
        dict(alpha=-0.1),
        dict(iota=0.0),
        dict(iota=1.5),
        dict(batch_size=200, capacity=100),
    ):
        with pytest.raises(ValueError):
            TrainerConfig(**kwargs)


# --- critic pieces --------------------------------------------------------------


def test_critic_min_cases():
    np.testing.assert_array_equal(critic_min([1.0, 2.0], [2.0, 1.0]), [1.0, 1.0])
    same = np.array([0.3, -0.7, 2.0])
    np.testing.assert_array_equal(critic_min(same, same), same)
    with pytest.raises(ValueError):
        critic_min(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        critic_min(np.array([np.inf]), np.array([0.0]))


def test_critic_min_symmetry():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 6))
    np.testing.assert_array_equal(critic_min(a, b), critic_min(b, a))


def test_td_target_arithmetic():
    class StubActor:
        def distribution_batch(self, beliefs, rng, record=False):
            return np.tile([0.5, 0.5], (beliefs.shape[0], 1)), None

    net_lo = init_dense((2, 2), ["identity"], np.random.default_rng(0))
    net_lo.weights[0][:] = 0.0
    net_hi = net_lo.copy()
    net_lo.biases[0][:] = [2.0, 4.0]
    net_hi.biases[0][:] = [5.0, 6.0]
    critics = CriticPair(q1=net_lo, q2=net_hi, q1_target=net_lo, q2_target=net_hi)

    y = td_target(
        np.array([1.0]),
        np.array([[0.5, 0.5]]),
        np.array([0.0]),
        StubActor(),
        critics,
        gamma=0.95,
        rng=np.random.default_rng(0),
    )
    # bootstrap is 0.5*2 + 0.5*4 = 3 from the elementwise-min critic
    assert y[0] == pytest.approx(1.0 + 0.95 * 3.0)

    y_done = td_target(
        np.array([-0.8]),
        np.array([[0.5, 0.5]]),
        np.array([1.0]),
        StubActor(),
        critics,
        gamma=0.95,
        rng=np.random.default_rng(0),
    )
    assert y_done[0] == pytest.approx(-0.8)

    y_gamma0 = td_target(
        np.array([0.7]),
        np.array([[0.5, 0.5]]),
        np.array([0.0]),
        StubActor(),
        critics,
        gamma=0.0,
        rng=np.random.default_rng(0),
    )
    assert y_gamma0[0] == pytest.approx(0.7)


def test_td_target_invariant_under_critic_swap():
    rng = np.random.default_rng(1)
    critics = make_critics(2, rng)
    swapped = CriticPair(
        q1=critics.q2, q2=critics.q1, q1_target=critics.q2_target, q2_target=critics.q1_target
    )
    actor = make_actor("sac_categorical", 2, np.random.default_rng(2))
    beliefs = np.tile([0.25, 0.25, 0.25, 0.25], (3, 1))
    args = (np.array([1.0, 2.0, 3.0]), beliefs, np.zeros(3))
    a = td_target(*args, actor, critics, 0.9, np.random.default_rng(0))
    b = td_target(*args, actor, swapped, 0.9, np.random.default_rng(0))
    np.testing.assert_array_equal(a, b)


def test_critic_loss_values_and_masking():
    net = init_dense((2, 4), ["identity"], np.random.default_rng(0))
    net.weights[0][:] = 0.0
    net.biases[0][:] = 0.0
    beliefs = np.array([[0.5, 0.5]])
    actions = np.array([2])
    # prediction 0 vs target 2: squared error 4
    loss, tape = critic_loss_and_grads(net, beliefs, actions, np.array([2.0]))
    assert loss == pytest.approx(4.0)
    # only the taken action's output column receives gradient
    assert tape.d_biases[0][2] != 0.0
    assert tape.d_biases[0][[0, 1, 3]].tolist() == [0.0, 0.0, 0.0]

    # exact targets mean zero loss and zero gradient
    loss0, tape0 = critic_loss_and_grads(net, beliefs, actions, np.array([0.0]))
    assert loss0 == 0.0
    assert all((dw == 0).all() for dw in tape0.d_weights)


def test_critic_loss_gradient_matches_fd():
    rng = np.random.default_rng(3)
    net = init_dense((4, 8, 4), ["mish", "identity"], rng)
    beliefs = rng.dirichlet(np.ones(4), size=6)
    actions = rng.integers(0, 4, size=6)
    targets = rng.normal(size=6)
    loss, tape = critic_loss_and_grads(net, beliefs, actions, targets)
    h = 1e-6
    for layer in (0, 1):
        idx = tuple(rng.integers(0, s) for s in net.weights[layer].shape)
        orig = net.weights[layer][idx]
        net.weights[layer][idx] = orig + h
        f_plus, _ = critic_loss_and_grads(net, beliefs, actions, targets)
        net.weights[layer][idx] = orig - h
        f_minus, _ = critic_loss_and_grads(net, beliefs, actions, targets)
        net.weights[layer][idx] = orig
        fd = (f_plus - f_minus) / (2 * h)
        assert abs(tape.d_weights[layer][idx] - fd) <= 1e-4 * max(abs(fd), 1e-3)


# --- actor objective -------------------------------------------------------------


def test_actor_objective_values():
    uniform = np.full((1, 32), 1.0 / 32)
    # alpha 0 and zero Q: nothing to optimize
    assert actor_objective(uniform, np.zeros((1, 32)), alpha=0.0)[0] == 0.0
    # entropy of the uniform distribution over 32 actions
    got = actor_objective(uniform, np.zeros((1, 32)), alpha=1.0)[0]
    assert got == pytest.approx(math.log(32))
    one_hot = np.zeros((1, 4))
    one_hot[0, 1] = 1.0
    assert entropy(one_hot)[0] == 0.0


def test_actor_loss_uniform_policy_is_neg_log32():
    class UniformActor:
        def distribution_batch(self, beliefs, rng, record=False):
            pi = np.full((beliefs.shape[0], 32), 1.0 / 32)
            return pi, (pi, None)

        def backward_pi(self, record, d_pi):
            self.last_d_pi = d_pi
            return None

    rng = np.random.default_rng(0)
    critics = make_critics(5, rng)
    for net in (critics.q1, critics.q2):
        for w in net.weights:
            w[:] = 0.0
        for b in net.biases:
            b[:] = 0.0
    beliefs = np.tile(np.full(32, 1.0 / 32), (3, 1))
    loss, _ = actor_loss_and_grads(beliefs, UniformActor(), critics, alpha=1.0, rng=rng)
    assert loss == pytest.approx(-math.log(32))


def test_actor_loss_gradient_matches_fd_through_chain():
    env = EnvConfig(n_clients=2)
    actor = make_actor("drl_ass", 2, np.random.default_rng(0), hidden=(4, 8))
    critics = make_critics(2, np.random.default_rng(1))
    beliefs = np.random.default_rng(2).dirichlet(np.ones(4), size=5)

    loss, tape = actor_loss_and_grads(beliefs, actor, critics, 0.05, np.random.default_rng(55))

    def loss_only():
        value, _ = actor_loss_and_grads(
            beliefs, actor, critics, 0.05, np.random.default_rng(55)
        )
        return value

    rng = np.random.default_rng(9)
    h = 1e-6
    for layer in range(len(actor.net.weights)):
        idx = tuple(rng.integers(0, s) for s in actor.net.weights[layer].shape)
        orig = actor.net.weights[layer][idx]
        actor.net.weights[layer][idx] = orig + h
        f_plus = loss_only()
        actor.net.weights[layer][idx] = orig - h
        f_minus = loss_only()
        actor.net.weights[layer][idx] = orig
        fd = (f_plus - f_minus) / (2 * h)
        assert abs(tape.d_weights[layer][idx] - fd) <= 1e-4 * max(abs(fd), 1e-3)


def test_actor_update_leaves_critics_alone():
    # gradient isolation both ways: the actor step touches no critic
    # parameter, the critic step touches no actor parameter
    actor = make_actor("drl_ass", 1, np.random.default_rng(0), hidden=(4,))
    critics = make_critics(1, np.random.default_rng(1))
    beliefs = np.array([[0.5, 0.5], [0.2, 0.8]])

    critic_before = [w.copy() for w in critics.q1.weights + critics.q2.weights]
    _, actor_tape = actor_loss_and_grads(beliefs, actor, critics, 0.05, np.random.default_rng(2))
    for w, before in zip(critics.q1.weights + critics.q2.weights, critic_before):
        np.testing.assert_array_equal(w, before)

    actor_before = [w.copy() for w in actor.net.weights]
    critic_loss_and_grads(critics.q1, beliefs, np.array([0, 1]), np.array([0.5, -0.5]))
    for w, before in zip(actor.net.weights, actor_before):
        np.testing.assert_array_equal(w, before)


# --- soft updates ------------------------------------------------------------------


def test_soft_update_endpoints_and_contraction():
    rng = np.random.default_rng(4)
    live = init_dense((2, 3), ["identity"], rng)
    target = init_dense((2, 3), ["identity"], rng)

    # iota = 1 copies the live net outright
    t1 = target.copy()
    soft_update(live, t1, iota=1.0)
    np.testing.assert_array_equal(t1.weights[0], live.weights[0])

    # scalar case: 0.005 of the way from 0 toward 1
    live_s = init_dense((1, 1), ["identity"], np.random.default_rng(0))
    live_s.weights[0][:] = 1.0
    targ_s = live_s.copy()
    targ_s.weights[0][:] = 0.0
    soft_update(live_s, targ_s, iota=0.005)
    assert targ_s.weights[0][0, 0] == pytest.approx(0.005)

    # frozen live net: the gap contracts geometrically
    gap_before = np.abs(target.weights[0] - live.weights[0]).max()
    for _ in range(50):
        soft_update(live, target, iota=0.1)
    gap_after = np.abs(target.weights[0] - live.weights[0]).max()
    assert gap_after <= (0.9**50) * gap_before + 1e-12


def test_soft_update_rejects_bad_iota():
    live = init_dense((1, 1), ["identity"], np.random.default_rng(0))
    with pytest.raises(ValueError):
        soft_update(live, live.copy(), iota=0.0)


# --- the loop ----------------------------------------------------------------------


def test_zero_steps_returns_initialization():
    env = EnvConfig(n_clients=2)
    tc = TrainerConfig(max_steps=0)
    result = train(env, tc, master_seed=5)
    fresh = train(env, tc, master_seed=5)
    for a, b in zip(result.actor.net.weights, fresh.actor.net.weights):
        np.testing.assert_array_equal(a, b)
    assert result.log_rows == []
    assert result.actor_opt.step == 0


def test_training_log_is_rerun_identical():
    env = EnvConfig(n_clients=2, max_rounds=6)
    tc = TrainerConfig(max_steps=8, warmup=4, batch_size=4, episodes_per_eval=4, eval_episodes=3)
    rows_a = train(env, tc, master_seed=7).log_rows
    rows_b = train(env, tc, master_seed=7).log_rows
    assert rows_a == rows_b
    assert [r["step"] for r in rows_a] == list(range(1, 9))
    # once warm, losses are reported
    assert rows_a[-1]["actor_loss"] is not None


def test_entropy_dominated_training_stays_spread():
    # with a single round budget and a large entropy weight the policy has
    # no reason to sharpen: its entropy stays near the uniform maximum
    env = EnvConfig(n_clients=2, max_rounds=1)
    tc = TrainerConfig(
        max_steps=60, warmup=10, batch_size=8, alpha=5.0, episodes_per_eval=0
    )
    result = train(env, tc, master_seed=3)
    rng = np.random.default_rng(0)
    pi = result.actor.distribution(np.full(4, 0.25), rng)
    assert entropy(pi[None, :])[0] >= 0.8 * math.log(4)
