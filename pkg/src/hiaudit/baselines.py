"""Comparison policies and alternative audit mechanisms.

Policies all answer the same question -- a distribution over the 2**N audit
actions given the current belief -- so trained actors, the uniform random
policy, and the fixed everyone/no-one heuristics are interchangeable in the
evaluation harness.  Mechanisms differ in how an episode is settled:
``hiaudit`` confirms flagged clients with the parameter-audit oracle,
``only_model`` eliminates straight off the flag with no oracle, and
``only_param`` skips model audits entirely and oracle-audits every client
up front.
"""

from __future__ import annotations

import numpy as np

from .belief import hypothesis_bits, malicious_clients, map_hypothesis
from .costs import CostParams, model_audit_cost, param_audit_cost, retention_cost
from .env import EnvConfig, EnvState, EpisodeResult, _retention_history, finalize
from .training import SoftmaxActor

POLICY_KINDS = ("drl_ass", "sac_categorical", "random", "audit_all", "audit_none")
MECHANISM_KINDS = ("hiaudit", "only_model", "only_param")
TRAINABLE_POLICY_KINDS = ("drl_ass", "sac_categorical")


class RandomPolicy:
    """Uniform over every action; ignores the belief entirely.

    ``include_empty=False`` spreads the mass over nonzero actions only.
    """

    kind = "random"

    def __init__(self, n_clients: int, include_empty: bool = True):
        self.n_clients = n_clients
        self.include_empty = include_empty

    def distribution(self, belief: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        count = 1 << self.n_clients
        if self.include_empty:
            return np.full(count, 1.0 / count)
        pi = np.full(count, 1.0 / (count - 1))
        pi[0] = 0.0
        return pi


class FixedActionPolicy:
    """Always plays one action; the everyone / no-one test anchors."""

    def __init__(self, n_clients: int, action: int, kind: str):
        self.n_clients = n_clients
        self.action = action
        self.kind = kind

    def distribution(self, belief: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        pi = np.zeros(1 << self.n_clients)
        pi[self.action] = 1.0
        return pi


def audit_all_policy(n_clients: int) -> FixedActionPolicy:
    return FixedActionPolicy(n_clients, (1 << n_clients) - 1, "audit_all")


def audit_none_policy(n_clients: int) -> FixedActionPolicy:
    return FixedActionPolicy(n_clients, 0, "audit_none")


def random_policy(belief: np.ndarray, rng: np.random.Generator, include_empty: bool = True) -> np.ndarray:
    """Functional form of :class:`RandomPolicy` for one belief."""
    n = int(np.log2(belief.shape[0]))
    return RandomPolicy(n, include_empty).distribution(belief, rng)


def sac_categorical_policy(belief: np.ndarray, actor_net) -> np.ndarray:
    """Softmax of the baseline actor net's logits."""
    return SoftmaxActor(actor_net).distribution(belief, np.random.default_rng(0))


def make_untrained_policy(kind: str, n_clients: int):
    if kind == "random":
        return RandomPolicy(n_clients)
    if kind == "audit_all":
        return audit_all_policy(n_clients)
    if kind == "audit_none":
        return audit_none_policy(n_clients)
    raise ValueError(f"policy kind {kind!r} needs a trained checkpoint")


def only_model_audit_finalize(
    state: EnvState, config: EnvConfig, costs: CostParams
) -> EpisodeResult:
    """Settle an episode on model audits alone: flag means eliminate.

    Without the oracle there is nothing to exonerate a flagged honest
    client or to confirm a flagged malicious one, so judgment errors run in
    both directions and no parameter-audit cycles are spent.
    """
    if not state.done:
        raise RuntimeError("finalize called before the episode ended")
    n = config.n_clients
    flagged = malicious_clients(hypothesis_bits(map_hypothesis(state.belief), n))
    truth = set(malicious_clients(state.true_state))

    eliminated = tuple(flagged)  # flag is taken at face value
    exonerated: tuple[int, ...] = ()
    survivors = tuple(sorted(truth.difference(flagged)))
    honest_flagged = any(c not in truth for c in flagged)

    ledger = state.ledger
    ledger.n_history = _retention_history(len(truth), len(survivors), state.round, config.post_rounds)
    ledger.n_final = len(survivors)
    ledger.c_model = model_audit_cost(costs.nu, ledger.audited_counts)
    ledger.c_para = 0.0
    ledger.c_mal = retention_cost(costs.rho_reward, ledger.n_history, ledger.n_final, costs.k_ip)

    return EpisodeResult(
        mechanism="only_model",
        flagged=flagged,
        eliminated=eliminated,
        exonerated=exonerated,
        survivors=survivors,
        honest_flagged=honest_flagged,
        malicious_survived=bool(survivors),
        misjudged=honest_flagged or bool(survivors),
        t_stop=state.round,
        truncated=state.truncated,
        c_model=ledger.c_model,
        c_para=ledger.c_para,
        c_mal=ledger.c_mal,
    )


def only_param_audit_finalize(
    config: EnvConfig, costs: CostParams, true_state: np.ndarray
) -> EpisodeResult:
    """Parameter-audit every client immediately; no model-audit rounds.

    The oracle identifies everyone perfectly, so judgment errors never
    happen; the price is the full per-client parameter-audit bill plus one
    round of retention for every malicious client.
    """
    n = config.n_clients
    everyone = tuple(range(1, n + 1))
    truth = tuple(malicious_clients(true_state))
    d = [costs.samples_of(i) for i in everyone]

    c_para = param_audit_cost(costs.varrho, d, everyone)
    c_mal = retention_cost(costs.rho_reward, [len(truth)], 0, costs.k_ip)

    return EpisodeResult(
        mechanism="only_param",
        flagged=everyone,
        eliminated=truth,
        exonerated=tuple(c for c in everyone if c not in truth),
        survivors=(),
        honest_flagged=False,
        malicious_survived=False,
        misjudged=False,
        t_stop=1,
        truncated=False,
        c_model=0.0,
        c_para=c_para,
        c_mal=c_mal,
    )


def finalize_episode(
    mechanism: str, state: EnvState, config: EnvConfig, costs: CostParams
) -> EpisodeResult:
    if mechanism == "hiaudit":
        return finalize(state, config, costs)
    if mechanism == "only_model":
        return only_model_audit_finalize(state, config, costs)
    if mechanism == "only_param":
        return only_param_audit_finalize(config, costs, state.true_state)
    raise ValueError(f"unknown mechanism {mechanism!r}")
