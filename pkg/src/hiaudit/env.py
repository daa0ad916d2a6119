"""The audit game as a POMDP environment.

An episode hides a fixed honest/malicious bit per client, feeds the agent
noisy per-client audit results for whichever subset it selects each round,
and maintains the exact posterior belief as the agent-visible observation
model.  The reward trades belief sharpening (measured by the average
Bayesian log-likelihood ratio of the posterior) against the number of
clients audited.  An episode ends when some hypothesis crosses the blocking
threshold, or is truncated after a round cap; a final parameter-audit step
then settles which clients are eliminated and what the episode cost.

The hidden state never crosses the policy boundary: policies see beliefs
only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .belief import (
    MAX_CLIENTS,
    AuditSelection,
    hypothesis_bits,
    malicious_clients,
    map_hypothesis,
    posterior_update,
    should_block,
    uniform_belief,
)
from .costs import CostLedger, CostParams, model_audit_cost, param_audit_cost, retention_cost


@dataclass(frozen=True)
class EnvConfig:
    """Environment parameters for one audit process.

    ``malicious_count`` overrides ``malicious_fraction`` when set: exactly
    that many clients are malicious, placed uniformly at random.
    ``post_rounds`` extends the retention-cost horizon past the blocking
    round; surviving malicious clients keep accruing per-round cost there.
    """

    n_clients: int = 5
    q: float = 0.2
    eta_th: float = 0.8
    max_rounds: int = 40
    xi: float = 0.4
    eps_clamp: float = 1e-6
    malicious_fraction: float = 0.5
    malicious_count: int | None = None
    post_rounds: int = 0
    seed: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.n_clients <= MAX_CLIENTS:
            raise ValueError(f"n_clients must be in [1, {MAX_CLIENTS}]")
        if not 0.0 < self.q < 0.5:
            raise ValueError(f"q must lie in (0, 0.5), got {self.q}")
        if not 1.0 / (1 << self.n_clients) < self.eta_th < 1.0:
            raise ValueError(
                f"eta_th must lie in (1/2**N, 1) = ({1.0 / (1 << self.n_clients)}, 1), "
                f"got {self.eta_th}"
            )
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")
        if not 0.0 < self.eps_clamp <= 1e-3:
            raise ValueError(f"eps_clamp must lie in (0, 1e-3], got {self.eps_clamp}")
        if not 0.0 <= self.malicious_fraction <= 1.0:
            raise ValueError("malicious_fraction must lie in [0, 1]")
        if self.malicious_count is not None and not 0 <= self.malicious_count <= self.n_clients:
            raise ValueError("malicious_count must lie in [0, n_clients]")
        if self.post_rounds < 0:
            raise ValueError("post_rounds must be nonnegative")

    @property
    def action_count(self) -> int:
        return 1 << self.n_clients

    def with_cell(self, eta_th: float | None = None, malicious_fraction: float | None = None,
                  malicious_count: int | None = None) -> "EnvConfig":
        """Copy with one evaluation cell's threshold / malicious mix applied."""
        kwargs = {}
        if eta_th is not None:
            kwargs["eta_th"] = eta_th
        if malicious_fraction is not None:
            kwargs["malicious_fraction"] = malicious_fraction
        if malicious_count is not None:
            kwargs["malicious_count"] = malicious_count
        return replace(self, **kwargs)


@dataclass
class EnvState:
    """One running episode.  ``true_state`` is hidden from policies."""

    true_state: np.ndarray
    belief: np.ndarray
    round: int = 0
    done: bool = False
    truncated: bool = False
    ledger: CostLedger = field(default_factory=CostLedger)


@dataclass(frozen=True)
class StepOutcome:
    next_belief: np.ndarray
    reward: float
    done: bool
    observation: dict[int, int]
    info: dict


@dataclass(frozen=True)
class EpisodeResult:
    """Settled outcome of one audit process.

    ``flagged`` is the malicious set announced at blocking time;
    ``eliminated`` the subset confirmed and removed; ``exonerated`` the
    flagged-but-honest clients the parameter audit cleared; ``survivors``
    the malicious clients never flagged.  ``misjudged`` is the judgment
    error the mechanism is charged with (see each finalize function).
    """

    mechanism: str
    flagged: tuple[int, ...]
    eliminated: tuple[int, ...]
    exonerated: tuple[int, ...]
    survivors: tuple[int, ...]
    honest_flagged: bool
    malicious_survived: bool
    misjudged: bool
    t_stop: int
    truncated: bool
    c_model: float
    c_para: float
    c_mal: float

    @property
    def total_overhead(self) -> float:
        return self.c_model + self.c_para + self.c_mal


def reset(config: EnvConfig, rng: np.random.Generator) -> EnvState:
    """Start an episode: sample the hidden state, reset belief to uniform."""
    n = config.n_clients
    if config.malicious_count is not None:
        bits = np.zeros(n, dtype=np.int8)
        where = rng.permutation(n)[: config.malicious_count]
        bits[where] = 1
    else:
        bits = (rng.random(n) < config.malicious_fraction).astype(np.int8)
    return EnvState(true_state=bits, belief=uniform_belief(n))


def observe(
    true_state: np.ndarray,
    sel: AuditSelection,
    q: float,
    rng: np.random.Generator,
) -> dict[int, int]:
    """Model-audit the selected clients; each reading flips with probability q.

    Noise draws happen in ascending client order, one per audited client, so
    a fixed generator state yields a fixed observation.
    """
    subset = sel.subset
    flips = rng.random(len(subset)) < q
    return {
        client: int(true_state[client - 1]) ^ int(flip)
        for client, flip in zip(subset, flips)
    }


def abllr(belief: np.ndarray, eps_clamp: float = 1e-6) -> float:
    """Average Bayesian log-likelihood ratio of a belief vector.

    Entries are clamped into [eps_clamp, 1 - eps_clamp] before the log, so
    the value is finite even for (numerically) one-hot beliefs.  Zero for a
    two-hypothesis coin-flip belief; grows as mass concentrates.
    """
    phi = np.clip(np.asarray(belief, dtype=float), eps_clamp, 1.0 - eps_clamp)
    return float(np.sum(phi * (np.log(phi) - np.log1p(-phi))))


def reward(
    prev_belief: np.ndarray,
    next_belief: np.ndarray,
    sel: AuditSelection,
    xi: float,
    eps_clamp: float = 1e-6,
) -> float:
    """Belief-sharpening gain minus the per-client audit charge."""
    gain = abllr(next_belief, eps_clamp) - abllr(prev_belief, eps_clamp)
    return xi * gain - (1.0 - xi) * len(sel)


def as_selection(action, n_clients: int) -> AuditSelection:
    if isinstance(action, AuditSelection):
        if action.n_clients != n_clients:
            raise ValueError("selection sized for a different client count")
        return action
    return AuditSelection(int(action), n_clients)


def step(
    state: EnvState,
    action,
    config: EnvConfig,
    rng: np.random.Generator,
) -> StepOutcome:
    """Run one audit round: observe, update belief, reward, check stopping.

    Mutates ``state`` in place and returns the step outcome.  ``action``
    may be an integer or an :class:`AuditSelection`.
    """
    if state.done:
        raise RuntimeError("step() called on a finished episode")
    sel = as_selection(action, config.n_clients)

    obs = observe(state.true_state, sel, config.q, rng)
    prev_belief = state.belief
    next_belief = posterior_update(prev_belief, obs, config.q)
    delta = abllr(next_belief, config.eps_clamp) - abllr(prev_belief, config.eps_clamp)
    r = config.xi * delta - (1.0 - config.xi) * len(sel)

    state.belief = next_belief
    state.round += 1
    state.ledger.audited_counts.append(len(sel))

    blocked = should_block(next_belief, config.eta_th)
    truncated = not blocked and state.round >= config.max_rounds
    state.done = blocked or truncated
    state.truncated = truncated

    info = {
        "round": state.round,
        "abllr_delta": delta,
        "audited_count": len(sel),
        "blocked": blocked,
        "truncated": truncated,
    }
    return StepOutcome(
        next_belief=next_belief.copy(),
        reward=r,
        done=state.done,
        observation=obs,
        info=info,
    )


def _retention_history(n_malicious: int, n_surviving: int, t_stop: int, post_rounds: int) -> list[int]:
    # All malicious clients sit in the system until the blocking round;
    # only the never-flagged ones remain for any post-blocking horizon.
    return [n_malicious] * t_stop + [n_surviving] * post_rounds


def finalize(state: EnvState, config: EnvConfig, costs: CostParams) -> EpisodeResult:
    """Settle a finished episode under the hierarchical mechanism.

    The most believed hypothesis names the flagged set; a parameter audit
    (a perfect oracle) then confirms each flagged client's true bit.
    Confirmed malicious clients are eliminated; flagged honest clients are
    exonerated and retained -- the event is recorded but, because the oracle
    catches it, it does not count as a judgment error here.  Malicious
    clients the flag missed survive, and any survivor marks the episode
    misjudged.
    """
    if not state.done:
        raise RuntimeError("finalize() called before the episode ended")
    n = config.n_clients
    flagged = malicious_clients(hypothesis_bits(map_hypothesis(state.belief), n))
    truth = set(malicious_clients(state.true_state))

    eliminated = tuple(c for c in flagged if c in truth)
    exonerated = tuple(c for c in flagged if c not in truth)
    survivors = tuple(sorted(truth.difference(flagged)))

    ledger = state.ledger
    ledger.n_history = _retention_history(
        len(truth), len(survivors), state.round, config.post_rounds
    )
    ledger.n_final = len(survivors)
    ledger.c_model = model_audit_cost(costs.nu, ledger.audited_counts)
    ledger.c_para = param_audit_cost(
        costs.varrho, [costs.samples_of(i) for i in range(1, n + 1)], flagged
    )
    ledger.c_mal = retention_cost(
        costs.rho_reward, ledger.n_history, ledger.n_final, costs.k_ip
    )

    return EpisodeResult(
        mechanism="hiaudit",
        flagged=flagged,
        eliminated=eliminated,
        exonerated=exonerated,
        survivors=survivors,
        honest_flagged=bool(exonerated),
        malicious_survived=bool(survivors),
        misjudged=bool(survivors),
        t_stop=state.round,
        truncated=state.truncated,
        c_model=ledger.c_model,
        c_para=ledger.c_para,
        c_mal=ledger.c_mal,
    )
