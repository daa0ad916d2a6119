"""Conditional diffusion model serving as the audit-selection actor.

A reverse denoising chain maps a standard-normal draw, conditioned on the
current belief vector, onto logits over all 2**N audit actions; a softmax
turns the logits into the action distribution.  The denoiser is a dense net
whose tanh output plays the role of the (squashed) predicted noise at each
step.  There is no forward-noising loss anywhere -- the chain is trained
purely through the reinforcement objective, so the only consumers of the
forward-process algebra are consistency checks.

Gradients flow through the whole unrolled chain: `generate_batch` can record
the per-step caches, and `chain_backward` pushes a logit gradient back
through every denoiser call with the sampled noises held fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import DenseNet, ForwardCache, GradientTape, backward, forward, init_dense, sinusoidal_embed, zero_tape

DEFAULT_STEPS = 5
DEFAULT_BETA_START = 0.05
DEFAULT_BETA_END = 0.5
DEFAULT_EMBED_DIM = 16
DEFAULT_HIDDEN = (32, 256, 256)

VARIANCE_CONVENTIONS = ("paper", "standard")


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise schedule; arrays are indexed by step - 1 (step y runs 1..Y)."""

    beta: np.ndarray
    omega: np.ndarray          # 1 - beta
    omega_bar: np.ndarray      # cumulative product of omega
    omega_bar_prev: np.ndarray # shifted by one, leading 1
    tilde_beta: np.ndarray     # posterior variance amplitude

    @property
    def steps(self) -> int:
        return self.beta.shape[0]


def make_schedule(
    y_steps: int,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> DiffusionSchedule:
    """Linear variance schedule over ``y_steps`` denoising steps.

    A single-step schedule takes the upper endpoint, so the one denoising
    step it has works against the strongest noise level.
    """
    if y_steps < 1:
        raise ValueError(f"need at least one diffusion step, got {y_steps}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError("betas must satisfy 0 < beta_start <= beta_end < 1")
    if y_steps == 1:
        beta = np.array([beta_end])
    else:
        beta = np.linspace(beta_start, beta_end, y_steps)
    omega = 1.0 - beta
    omega_bar = np.cumprod(omega)
    omega_bar_prev = np.concatenate(([1.0], omega_bar[:-1]))
    tilde_beta = (1.0 - omega_bar_prev) / (1.0 - omega_bar) * beta
    return DiffusionSchedule(
        beta=beta,
        omega=omega,
        omega_bar=omega_bar,
        omega_bar_prev=omega_bar_prev,
        tilde_beta=tilde_beta,
    )


def noise_scale(schedule: DiffusionSchedule, y: int, convention: str = "paper") -> float:
    """Multiplier applied to the reverse-step noise at step y."""
    tb = schedule.tilde_beta[y - 1]
    if convention == "paper":
        return float((tb / 2.0) ** 2)
    if convention == "standard":
        return float(np.sqrt(tb))
    raise ValueError(f"unknown variance convention {convention!r}")


@dataclass
class AssPolicy:
    """Audit-selection actor: denoiser net + schedule + conventions.

    ``strict_final_noise`` keeps the reverse-step noise at the last step as
    well; by default the final step emits the mean, so repeated generation
    under a frozen noise stream is reproducible and the emitted logits are
    not needlessly jittered.
    """

    denoiser: DenseNet
    schedule: DiffusionSchedule
    n_clients: int
    embed_dim: int = DEFAULT_EMBED_DIM
    variance_convention: str = "paper"
    strict_final_noise: bool = False
    _embed_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.variance_convention not in VARIANCE_CONVENTIONS:
            raise ValueError(f"unknown variance convention {self.variance_convention!r}")
        expected_in = 2 * self.action_dim + self.embed_dim
        if self.denoiser.in_dim != expected_in:
            raise ValueError(
                f"denoiser input dim {self.denoiser.in_dim} != {expected_in} "
                "(action logits + step embedding + belief)"
            )
        if self.denoiser.out_dim != self.action_dim:
            raise ValueError("denoiser output dim must equal the action count")

    @property
    def action_dim(self) -> int:
        return 1 << self.n_clients

    def step_embedding(self, y: int) -> np.ndarray:
        if y not in self._embed_cache:
            self._embed_cache[y] = sinusoidal_embed(y, self.embed_dim)
        return self._embed_cache[y]

    def copy(self) -> "AssPolicy":
        return AssPolicy(
            denoiser=self.denoiser.copy(),
            schedule=self.schedule,
            n_clients=self.n_clients,
            embed_dim=self.embed_dim,
            variance_convention=self.variance_convention,
            strict_final_noise=self.strict_final_noise,
        )


def make_policy(
    n_clients: int,
    rng: np.random.Generator,
    y_steps: int = DEFAULT_STEPS,
    hidden: tuple[int, ...] = DEFAULT_HIDDEN,
    embed_dim: int = DEFAULT_EMBED_DIM,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
    variance_convention: str = "paper",
    strict_final_noise: bool = False,
) -> AssPolicy:
    """Fresh policy with mish hidden layers and a tanh-squashed output."""
    action_dim = 1 << n_clients
    dims = [2 * action_dim + embed_dim, *hidden, action_dim]
    activations = ["mish"] * len(hidden) + ["tanh"]
    denoiser = init_dense(dims, activations, rng)
    return AssPolicy(
        denoiser=denoiser,
        schedule=make_schedule(y_steps, beta_start, beta_end),
        n_clients=n_clients,
        embed_dim=embed_dim,
        variance_convention=variance_convention,
        strict_final_noise=strict_final_noise,
    )


def _as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def denoise(
    policy: AssPolicy, x_y: np.ndarray, y: int, beliefs: np.ndarray
) -> tuple[np.ndarray, ForwardCache]:
    """Squashed noise prediction for a batch of chain states and beliefs."""
    if not 1 <= y <= policy.schedule.steps:
        raise ValueError(f"diffusion step {y} out of range 1..{policy.schedule.steps}")
    batch = x_y.shape[0]
    emb = np.broadcast_to(policy.step_embedding(y), (batch, policy.embed_dim))
    net_in = np.concatenate([x_y, emb, beliefs], axis=1)
    return forward(policy.denoiser, net_in)


def predict_x0(x_y, y: int, belief, policy: AssPolicy) -> np.ndarray:
    """Denoised logits implied by chain state x_y at step y.

    Inverts the forward-noising identity using the denoiser's squashed
    output as the noise estimate: x0 = x_y / sqrt(w̄) - sqrt(1/w̄ - 1) * eps.
    """
    xb, squeeze = _as_batch(x_y)
    bb, _ = _as_batch(belief)
    eps_out, _ = denoise(policy, xb, y, bb)
    ob = policy.schedule.omega_bar[y - 1]
    x0 = xb / np.sqrt(ob) - np.sqrt(1.0 / ob - 1.0) * eps_out
    return x0[0] if squeeze else x0


def reverse_mean(x_y, y: int, belief, policy: AssPolicy) -> np.ndarray:
    """Mean of the reverse transition at step y (noise-prediction form)."""
    xb, squeeze = _as_batch(x_y)
    bb, _ = _as_batch(belief)
    eps_out, _ = denoise(policy, xb, y, bb)
    mu = _mean_from_eps(policy.schedule, y, xb, eps_out)
    return mu[0] if squeeze else mu


def _mean_from_eps(schedule: DiffusionSchedule, y: int, x_y: np.ndarray, eps_out: np.ndarray) -> np.ndarray:
    i = y - 1
    return (x_y - schedule.beta[i] * eps_out / np.sqrt(1.0 - schedule.omega_bar[i])) / np.sqrt(
        schedule.omega[i]
    )


def reverse_mean_via_x0(x_y, y: int, belief, policy: AssPolicy) -> np.ndarray:
    """Reverse mean from the posterior coefficients on (x0, x_y).

    Algebraically identical to :func:`reverse_mean`; kept as an independent
    route so the equivalence is testable.
    """
    xb, squeeze = _as_batch(x_y)
    bb, _ = _as_batch(belief)
    x0 = predict_x0(xb, y, bb, policy)
    s = policy.schedule
    i = y - 1
    coef_x0 = np.sqrt(s.omega_bar_prev[i]) * s.beta[i] / (1.0 - s.omega_bar[i])
    coef_xy = np.sqrt(s.omega[i]) * (1.0 - s.omega_bar_prev[i]) / (1.0 - s.omega_bar[i])
    mu = coef_x0 * x0 + coef_xy * xb
    return mu[0] if squeeze else mu


def reverse_step(x_y, y: int, belief, policy: AssPolicy, rng: np.random.Generator) -> np.ndarray:
    """One denoising transition x_y -> x_{y-1}.

    The final step (y = 1) emits the mean with no added noise unless the
    policy asks for strict noising everywhere.
    """
    xb, squeeze = _as_batch(x_y)
    bb, _ = _as_batch(belief)
    eps_out, _ = denoise(policy, xb, y, bb)
    mu = _mean_from_eps(policy.schedule, y, xb, eps_out)
    if y > 1 or policy.strict_final_noise:
        scale = noise_scale(policy.schedule, y, policy.variance_convention)
        mu = mu + scale * rng.standard_normal(mu.shape)
    return mu[0] if squeeze else mu


def softmax(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax, max-shifted for stability."""
    x = np.asarray(x, dtype=float)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ChainRecord:
    """Per-step forward caches of one recorded generation, y = Y down to 1."""

    steps: list[tuple[int, ForwardCache]]
    logits: np.ndarray


def generate_batch(
    beliefs: np.ndarray,
    policy: AssPolicy,
    rng: np.random.Generator,
    record: bool = False,
    initial: np.ndarray | None = None,
) -> tuple[np.ndarray, ChainRecord | None]:
    """Run the full reverse chain for a batch of beliefs.

    Returns the action distributions (softmax of the final logits) and,
    when ``record`` is set, the chain record needed to backpropagate.
    ``initial`` overrides the starting noise (used by gradient checks).
    """
    beliefs = np.asarray(beliefs, dtype=float)
    if beliefs.ndim != 2:
        raise ValueError("generate_batch expects a (batch, 2**N) belief array")
    batch = beliefs.shape[0]
    a_dim = policy.action_dim
    x = rng.standard_normal((batch, a_dim)) if initial is None else np.array(initial, dtype=float)
    steps: list[tuple[int, ForwardCache]] = []
    for y in range(policy.schedule.steps, 0, -1):
        eps_out, cache = denoise(policy, x, y, beliefs)
        mu = _mean_from_eps(policy.schedule, y, x, eps_out)
        if record:
            steps.append((y, cache))
        if y > 1 or policy.strict_final_noise:
            scale = noise_scale(policy.schedule, y, policy.variance_convention)
            x = mu + scale * rng.standard_normal(mu.shape)
        else:
            x = mu
    pi = softmax(x)
    return pi, (ChainRecord(steps=steps, logits=x) if record else None)


def generate(
    belief: np.ndarray,
    policy: AssPolicy,
    rng: np.random.Generator,
    record: bool = False,
) -> np.ndarray | tuple[np.ndarray, ChainRecord]:
    """Single-belief convenience wrapper around :func:`generate_batch`."""
    pi, rec = generate_batch(np.asarray(belief, dtype=float)[None, :], policy, rng, record=record)
    return (pi[0], rec) if record else pi[0]


def chain_backward(policy: AssPolicy, record: ChainRecord, d_logits: np.ndarray) -> GradientTape:
    """Push a gradient w.r.t. the final logits back through the chain.

    The sampled noises are additive constants under the reparameterized
    sampling, so only the denoiser calls and the pass-through terms carry
    gradient.  Returns the accumulated denoiser parameter tape.
    """
    s = policy.schedule
    total = zero_tape(policy.denoiser)
    g = np.asarray(d_logits, dtype=float)
    a_dim = policy.action_dim
    for y, cache in reversed(record.steps):
        i = y - 1
        coef = -s.beta[i] / (np.sqrt(s.omega[i]) * np.sqrt(1.0 - s.omega_bar[i]))
        tape = backward(policy.denoiser, cache, coef * g)
        total.add_(tape)
        g = g / np.sqrt(s.omega[i]) + tape.d_input[:, :a_dim]
    return total


def softmax_backward(pi: np.ndarray, d_pi: np.ndarray) -> np.ndarray:
    """Gradient through a row-wise softmax: d_logits from d_pi."""
    inner = (pi * d_pi).sum(axis=-1, keepdims=True)
    return pi * (d_pi - inner)


def sample_action(pi: np.ndarray, rng: np.random.Generator, greedy: bool = False) -> int:
    """Draw an action index from a distribution (or take its argmax)."""
    pi = np.asarray(pi, dtype=float)
    if greedy:
        return int(np.argmax(pi))
    cdf = np.cumsum(pi)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), pi.shape[0] - 1))
