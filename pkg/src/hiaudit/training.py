"""Actor-critic training loop for the audit-selection policy.

One training step rolls a full audit episode with the current actor
(hidden state drawn from the same uniform prior the belief starts from),
stores the transitions, then performs one batched update: both critics move
toward the TD target built from the target actor and the elementwise
minimum of the target critics, the actor ascends expected Q plus an entropy
bonus through its full generation chain, and the target networks blend
toward the live ones.

Two actor flavors share the trainer: the diffusion-chain actor and a plain
softmax net (the categorical actor-critic baseline).  Both expose the same
surface -- a distribution per belief, and a backward pass from a gradient
w.r.t. that distribution onto their parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import env as env_mod
from .costs import CostParams
from .diffusion import (
    AssPolicy,
    chain_backward,
    generate_batch,
    make_policy,
    sample_action,
    softmax,
    softmax_backward,
)
from .env import EnvConfig
from .nets import (
    AdamState,
    DenseNet,
    GradientTape,
    TrainingDivergence,
    adam_init,
    adam_step,
    backward,
    forward,
    init_dense,
)
from .seeding import (
    STREAM_BATCH,
    STREAM_INIT,
    STREAM_POLICY,
    STREAM_ROLLOUT,
    STREAM_TARGET,
    STREAM_TRAIN_EVAL,
    derive_rng,
)

CRITIC_HIDDEN = (256, 256)


@dataclass(frozen=True)
class TrainerConfig:
    gamma: float = 0.95
    alpha: float = 0.05
    iota: float = 0.005
    batch_size: int = 64
    capacity: int = 100_000
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    max_steps: int = 10_000
    warmup: int = 500
    updates_per_episode: int = 1
    episodes_per_eval: int = 500
    eval_episodes: int = 50
    target_entropy_term: bool = False
    divergence_limit: float = 1e6

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        if not 0.0 < self.iota <= 1.0:
            raise ValueError("iota must lie in (0, 1]")
        if self.batch_size > self.capacity:
            raise ValueError("batch_size cannot exceed replay capacity")
        if self.batch_size < 1 or self.capacity < 1:
            raise ValueError("batch_size and capacity must be positive")
        if self.max_steps < 0 or self.warmup < 0:
            raise ValueError("max_steps and warmup must be nonnegative")


@dataclass(frozen=True)
class Transition:
    belief: np.ndarray
    action: int
    next_belief: np.ndarray
    reward: float
    done: bool


class ReplayMemory:
    """Fixed-capacity FIFO ring of transitions with uniform batch sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, rng: np.random.Generator, batch_size: int) -> list[Transition]:
        """Uniform sample without replacement within the batch."""
        if batch_size > len(self._items):
            raise ValueError("not enough stored transitions to sample a batch")
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item: Transition) -> bool:
        return any(t is item for t in self._items)


class DiffusionActor:
    """Trainable wrapper around the diffusion-chain policy."""

    kind = "drl_ass"

    def __init__(self, policy: AssPolicy):
        self.policy = policy

    @property
    def net(self) -> DenseNet:
        return self.policy.denoiser

    def distribution(self, belief: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        pi, _ = generate_batch(np.asarray(belief, dtype=float)[None, :], self.policy, rng)
        return pi[0]

    def distribution_batch(
        self, beliefs: np.ndarray, rng: np.random.Generator, record: bool = False
    ):
        pi, rec = generate_batch(beliefs, self.policy, rng, record=record)
        return pi, (pi, rec) if record else (pi, None)

    def backward_pi(self, record, d_pi: np.ndarray) -> GradientTape:
        pi, chain_rec = record
        d_logits = softmax_backward(pi, d_pi)
        return chain_backward(self.policy, chain_rec, d_logits)

    def copy(self) -> "DiffusionActor":
        return DiffusionActor(self.policy.copy())


class SoftmaxActor:
    """Plain dense net + softmax actor (categorical actor-critic baseline)."""

    kind = "sac_categorical"

    def __init__(self, net: DenseNet):
        self.net = net

    def distribution(self, belief: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        logits, _ = forward(self.net, np.asarray(belief, dtype=float))
        return softmax(logits)

    def distribution_batch(
        self, beliefs: np.ndarray, rng: np.random.Generator, record: bool = False
    ):
        logits, cache = forward(self.net, beliefs)
        pi = softmax(logits)
        return pi, (pi, cache) if record else (pi, None)

    def backward_pi(self, record, d_pi: np.ndarray) -> GradientTape:
        pi, cache = record
        d_logits = softmax_backward(pi, d_pi)
        return backward(self.net, cache, d_logits)

    def copy(self) -> "SoftmaxActor":
        return SoftmaxActor(self.net.copy())


def make_softmax_actor_net(n_clients: int, rng: np.random.Generator,
                           hidden: tuple[int, ...] = (32, 256, 256)) -> DenseNet:
    action_dim = 1 << n_clients
    dims = [action_dim, *hidden, action_dim]
    return init_dense(dims, ["mish"] * len(hidden) + ["identity"], rng)


def make_critic(n_clients: int, rng: np.random.Generator) -> DenseNet:
    action_dim = 1 << n_clients
    dims = [action_dim, *CRITIC_HIDDEN, action_dim]
    return init_dense(dims, ["mish"] * len(CRITIC_HIDDEN) + ["identity"], rng)


@dataclass
class CriticPair:
    q1: DenseNet
    q2: DenseNet
    q1_target: DenseNet
    q2_target: DenseNet


def make_critics(n_clients: int, rng: np.random.Generator) -> CriticPair:
    q1 = make_critic(n_clients, rng)
    q2 = make_critic(n_clients, rng)
    return CriticPair(q1=q1, q2=q2, q1_target=q1.copy(), q2_target=q2.copy())


def critic_min(q1_out: np.ndarray, q2_out: np.ndarray) -> np.ndarray:
    """Elementwise minimum of the two critics' action values."""
    q1_out = np.asarray(q1_out, dtype=float)
    q2_out = np.asarray(q2_out, dtype=float)
    if q1_out.shape != q2_out.shape:
        raise ValueError(f"critic output shapes differ: {q1_out.shape} vs {q2_out.shape}")
    if not (np.isfinite(q1_out).all() and np.isfinite(q2_out).all()):
        raise ValueError("critic outputs must be finite")
    return np.minimum(q1_out, q2_out)


def entropy(pi: np.ndarray) -> np.ndarray:
    """Shannon entropy per distribution row (natural log, 0 log 0 = 0)."""
    pi = np.asarray(pi, dtype=float)
    terms = np.where(pi > 0.0, pi * np.log(np.maximum(pi, 1e-300)), 0.0)
    return -terms.sum(axis=-1)


def actor_objective(pi: np.ndarray, q_min: np.ndarray, alpha: float) -> np.ndarray:
    """Per-sample training objective: expected Q plus entropy bonus."""
    return (pi * q_min).sum(axis=-1) + alpha * entropy(pi)


def actor_loss_and_grads(
    beliefs: np.ndarray,
    actor,
    critics: CriticPair,
    alpha: float,
    rng: np.random.Generator,
) -> tuple[float, GradientTape]:
    """Negative mean objective over the batch plus its actor gradient.

    Critics enter as fixed coefficients: no gradient reaches their
    parameters, and the actor gradient flows through the entire generation
    chain of the policy.
    """
    if beliefs.shape[0] == 0:
        raise ValueError("actor loss needs a nonempty batch")
    pi, record = actor.distribution_batch(beliefs, rng, record=True)
    q1, _ = forward(critics.q1, beliefs)
    q2, _ = forward(critics.q2, beliefs)
    q_min = critic_min(q1, q2)
    per_sample = actor_objective(pi, q_min, alpha)
    loss = -float(per_sample.mean())
    log_pi = np.log(np.maximum(pi, 1e-300))
    d_pi = -(q_min + alpha * (-log_pi - 1.0)) / beliefs.shape[0]
    tape = actor.backward_pi(record, d_pi)
    return loss, tape


def td_target(
    rewards: np.ndarray,
    next_beliefs: np.ndarray,
    dones: np.ndarray,
    target_actor,
    critics: CriticPair,
    gamma: float,
    rng: np.random.Generator,
    alpha: float = 0.0,
    entropy_term: bool = False,
) -> np.ndarray:
    """Bootstrap targets: reward plus the target actor's expected target-Q.

    Terminal transitions bootstrap nothing.  With ``entropy_term`` the
    expectation runs over Q - alpha*log(pi) instead (the usual soft target).
    """
    pi, _ = target_actor.distribution_batch(next_beliefs, rng, record=False)
    qt1, _ = forward(critics.q1_target, next_beliefs)
    qt2, _ = forward(critics.q2_target, next_beliefs)
    q_min = critic_min(qt1, qt2)
    if entropy_term:
        q_min = q_min - alpha * np.log(np.maximum(pi, 1e-300))
    bootstrap = (pi * q_min).sum(axis=-1)
    return rewards + gamma * bootstrap * (1.0 - dones)


def critic_loss_and_grads(
    critic: DenseNet,
    beliefs: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, GradientTape]:
    """Squared TD error on the taken action's Q entry only."""
    q_all, cache = forward(critic, beliefs)
    batch = beliefs.shape[0]
    taken = q_all[np.arange(batch), actions]
    err = taken - targets
    loss = float((err * err).mean())
    d_q = np.zeros_like(q_all)
    d_q[np.arange(batch), actions] = 2.0 * err / batch
    return loss, backward(critic, cache, d_q)


def soft_update(live: DenseNet, target: DenseNet, iota: float) -> None:
    """Blend live parameters into the target in place."""
    if not 0.0 < iota <= 1.0:
        raise ValueError("iota must lie in (0, 1]")
    for wt, wl in zip(target.weights, live.weights):
        wt *= 1.0 - iota
        wt += iota * wl
    for bt, bl in zip(target.biases, live.biases):
        bt *= 1.0 - iota
        bt += iota * bl


def make_actor(policy_kind: str, n_clients: int, rng: np.random.Generator, **policy_kwargs):
    if policy_kind == "drl_ass":
        return DiffusionActor(make_policy(n_clients, rng, **policy_kwargs))
    if policy_kind == "sac_categorical":
        return SoftmaxActor(make_softmax_actor_net(n_clients, rng))
    raise ValueError(f"policy kind {policy_kind!r} is not trainable")


@dataclass
class TrainResult:
    actor: object
    critics: CriticPair
    target_actor: object
    actor_opt: AdamState
    q1_opt: AdamState
    q2_opt: AdamState
    log_rows: list[dict] = field(default_factory=list)


def _rollout_episode(
    actor,
    env_config: EnvConfig,
    rng_env: np.random.Generator,
    rng_policy: np.random.Generator,
    replay: ReplayMemory | None,
) -> float:
    state = env_mod.reset(env_config, rng_env)
    total = 0.0
    while not state.done:
        belief_before = state.belief.copy()
        pi = actor.distribution(belief_before, rng_policy)
        action = sample_action(pi, rng_policy)
        out = env_mod.step(state, action, env_config, rng_env)
        total += out.reward
        if replay is not None:
            replay.push(
                Transition(
                    belief=belief_before,
                    action=action,
                    next_belief=out.next_belief.copy(),
                    reward=out.reward,
                    done=out.done,
                )
            )
    return total


def _quick_eval(
    actor,
    env_config: EnvConfig,
    costs: CostParams,
    episodes: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Misjudgment rate and mean total overhead over fresh episodes."""
    errors = 0
    overhead = 0.0
    for _ in range(episodes):
        state = env_mod.reset(env_config, rng)
        while not state.done:
            pi = actor.distribution(state.belief, rng)
            env_mod.step(state, sample_action(pi, rng), env_config, rng)
        result = env_mod.finalize(state, env_config, costs)
        errors += int(result.misjudged)
        overhead += result.total_overhead
    return errors / episodes, overhead / episodes


def train(
    env_config: EnvConfig,
    trainer_config: TrainerConfig,
    master_seed: int = 0,
    policy_kind: str = "drl_ass",
    cost_params: CostParams | None = None,
    timings: bool = False,
    progress: bool = False,
    **policy_kwargs,
) -> TrainResult:
    """Run the full training loop and return nets, optimizers, and the log.

    Training episodes draw the hidden state from the uniform prior over all
    hypotheses (each client malicious with probability one half), matching
    the belief initialization; evaluation mixes are a separate concern.
    """
    costs = cost_params if cost_params is not None else CostParams()
    train_env = replace(env_config, malicious_fraction=0.5, malicious_count=None)

    rng_init = derive_rng(master_seed, STREAM_INIT)
    actor = make_actor(policy_kind, env_config.n_clients, rng_init, **policy_kwargs)
    critics = make_critics(env_config.n_clients, rng_init)
    target_actor = actor.copy()

    actor_opt = adam_init(actor.net, trainer_config.actor_lr)
    q1_opt = adam_init(critics.q1, trainer_config.critic_lr)
    q2_opt = adam_init(critics.q2, trainer_config.critic_lr)

    replay = ReplayMemory(trainer_config.capacity)
    result = TrainResult(
        actor=actor,
        critics=critics,
        target_actor=target_actor,
        actor_opt=actor_opt,
        q1_opt=q1_opt,
        q2_opt=q2_opt,
    )

    for step_idx in range(1, trainer_config.max_steps + 1):
        t0 = time.perf_counter()
        rng_env = derive_rng(master_seed, STREAM_ROLLOUT, step_idx)
        rng_policy = derive_rng(master_seed, STREAM_POLICY, step_idx)
        episode_reward = _rollout_episode(actor, train_env, rng_env, rng_policy, replay)

        actor_loss = None
        critic_loss = None
        if len(replay) >= max(trainer_config.warmup, trainer_config.batch_size):
            rng_batch = derive_rng(master_seed, STREAM_BATCH, step_idx)
            rng_target = derive_rng(master_seed, STREAM_TARGET, step_idx)
            for _ in range(trainer_config.updates_per_episode):
                batch = replay.sample(rng_batch, trainer_config.batch_size)
                beliefs = np.stack([t.belief for t in batch])
                actions = np.array([t.action for t in batch])
                next_beliefs = np.stack([t.next_belief for t in batch])
                rewards = np.array([t.reward for t in batch])
                dones = np.array([float(t.done) for t in batch])

                targets = td_target(
                    rewards,
                    next_beliefs,
                    dones,
                    target_actor,
                    critics,
                    trainer_config.gamma,
                    rng_target,
                    alpha=trainer_config.alpha,
                    entropy_term=trainer_config.target_entropy_term,
                )
                loss1, tape1 = critic_loss_and_grads(critics.q1, beliefs, actions, targets)
                adam_step(critics.q1, tape1, q1_opt)
                loss2, tape2 = critic_loss_and_grads(critics.q2, beliefs, actions, targets)
                adam_step(critics.q2, tape2, q2_opt)
                critic_loss = loss1 + loss2

                actor_loss, actor_tape = actor_loss_and_grads(
                    beliefs, actor, critics, trainer_config.alpha, rng_target
                )
                adam_step(actor.net, actor_tape, actor_opt)

                soft_update(actor.net, target_actor.net, trainer_config.iota)
                soft_update(critics.q1, critics.q1_target, trainer_config.iota)
                soft_update(critics.q2, critics.q2_target, trainer_config.iota)

            for name, value in (("actor", actor_loss), ("critic", critic_loss)):
                if value is not None and (not np.isfinite(value) or abs(value) > trainer_config.divergence_limit):
                    raise TrainingDivergence(f"{name} loss diverged at step {step_idx}: {value}")

        eval_misjudgment = None
        eval_overhead = None
        if (
            trainer_config.episodes_per_eval > 0
            and step_idx % trainer_config.episodes_per_eval == 0
        ):
            rng_eval = derive_rng(master_seed, STREAM_TRAIN_EVAL, step_idx)
            eval_misjudgment, eval_overhead = _quick_eval(
                actor, env_config, costs, trainer_config.eval_episodes, rng_eval
            )
            if progress:
                print(
                    f"[train] step {step_idx}/{trainer_config.max_steps} "
                    f"reward={episode_reward:.3f} misjudgment={eval_misjudgment:.3f}",
                    flush=True,
                )

        wall_ms = (time.perf_counter() - t0) * 1000.0 if timings else 0.0
        result.log_rows.append(
            {
                "step": step_idx,
                "episode_reward": episode_reward,
                "actor_loss": actor_loss,
                "critic_loss": critic_loss,
                "eval_misjudgment": eval_misjudgment,
                "eval_overhead": eval_overhead,
                "wall_ms": wall_ms,
            }
        )

    return result
