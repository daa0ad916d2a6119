"""Exact Bayesian belief tracking over joint client-honesty hypotheses.

With N clients there are h = 2**N joint hypotheses.  Hypothesis j is
identified with the N-bit expansion of j, client 1 on the most significant
bit: bit 1 marks the client as malicious, bit 0 as honest.  Audit results
arrive as noisy binary readings of individual client bits (each reading
flips the true bit with probability q), and the posterior over all h
hypotheses is updated in closed form after every audit round.

Clients are numbered 1..N throughout the public API; internally client i
lives at array position i - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

# Hypothesis count doubles per client; 2**10 keeps the exact recursion and
# the action space at desk scale.
MAX_CLIENTS = 10


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_CLIENTS:
        raise ValueError(f"client count must be in [1, {MAX_CLIENTS}], got {n}")


def _check_q(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise ValueError(f"audit error probability must lie in (0, 1), got {q}")


@lru_cache(maxsize=MAX_CLIENTS)
def bits_table(n: int) -> np.ndarray:
    """(2**n, n) array whose row j is the bit vector of hypothesis j.

    Read-only (the cache hands out the same array to every caller).
    """
    _check_n(n)
    h = 1 << n
    shifts = np.arange(n - 1, -1, -1)
    table = (np.arange(h)[:, None] >> shifts[None, :]) & 1
    table = table.astype(np.int8)
    table.setflags(write=False)
    return table


def hypothesis_bits(j: int, n: int) -> np.ndarray:
    """N-bit expansion of hypothesis index j (client 1 = high bit)."""
    _check_n(n)
    if not 0 <= j < (1 << n):
        raise ValueError(f"hypothesis index {j} out of range for {n} clients")
    return bits_table(n)[j].copy()


def hypothesis_index(bits) -> int:
    """Inverse of :func:`hypothesis_bits`."""
    bits = np.asarray(bits)
    _check_n(bits.size)
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("state vector entries must be 0 or 1")
    j = 0
    for b in bits:
        j = (j << 1) | int(b)
    return j


def malicious_clients(bits) -> tuple[int, ...]:
    """1-based indices of the clients a state vector marks malicious."""
    return tuple(int(i) + 1 for i in np.flatnonzero(np.asarray(bits) == 1))


@dataclass(frozen=True)
class AuditSelection:
    """A subset of clients to model-audit, encoded as an integer action.

    The N-bit expansion of ``action`` picks the subset with the same
    client-1-is-high-bit convention as hypothesis indices; action 0 audits
    nobody and action 2**N - 1 audits everyone.
    """

    action: int
    n_clients: int

    def __post_init__(self) -> None:
        _check_n(self.n_clients)
        if not 0 <= self.action < (1 << self.n_clients):
            raise ValueError(
                f"action {self.action} out of range for {self.n_clients} clients"
            )

    @property
    def subset(self) -> tuple[int, ...]:
        """Audited clients, ascending, 1-based."""
        return malicious_clients(hypothesis_bits(self.action, self.n_clients))

    @classmethod
    def from_clients(cls, clients, n_clients: int) -> "AuditSelection":
        action = 0
        for c in clients:
            if not 1 <= c <= n_clients:
                raise ValueError(f"client index {c} out of range 1..{n_clients}")
            action |= 1 << (n_clients - c)
        return cls(action, n_clients)

    def __len__(self) -> int:
        return bin(self.action).count("1")


def uniform_belief(n: int) -> np.ndarray:
    """The ignorance prior: equal mass on all 2**n hypotheses."""
    _check_n(n)
    h = 1 << n
    return np.full(h, 1.0 / h)


def n_from_belief(belief: np.ndarray) -> int:
    h = belief.shape[0]
    n = h.bit_length() - 1
    if belief.ndim != 1 or (1 << n) != h:
        raise ValueError(f"belief length must be a power of two, got shape {belief.shape}")
    _check_n(n)
    return n


def likelihood_vector(obs: Mapping[int, int], q: float, n: int) -> np.ndarray:
    """P(observed audit results | hypothesis j) for every j at once.

    ``obs`` maps audited client index -> binary audit result.  An empty
    observation carries no information and yields the all-ones vector.
    Computed as q**mismatches * (1-q)**matches from integer counts, so the
    value is independent of the order the audited clients are listed in.
    """
    _check_q(q)
    _check_n(n)
    table = bits_table(n)
    mismatches = np.zeros(1 << n, dtype=np.int64)
    for client, value in obs.items():
        if not 1 <= client <= n:
            raise ValueError(f"client index {client} out of range 1..{n}")
        if value not in (0, 1):
            raise ValueError(f"audit result for client {client} must be 0 or 1")
        mismatches += table[:, client - 1] != value
    matches = len(obs) - mismatches
    return np.power(q, mismatches) * np.power(1.0 - q, matches)


def observation_likelihood(obs: Mapping[int, int], j: int, q: float, n: int) -> float:
    """P(observed audit results | hypothesis j) for a single hypothesis."""
    bits = hypothesis_bits(j, n)
    _check_q(q)
    value = 1.0
    for client, result in obs.items():
        if not 1 <= client <= n:
            raise ValueError(f"client index {client} out of range 1..{n}")
        value *= (1.0 - q) if bits[client - 1] == result else q
    return value


def posterior_update(prior: np.ndarray, obs: Mapping[int, int], q: float) -> np.ndarray:
    """One Bayes step: reweight the prior by the audit likelihood, renormalize.

    The hidden state is held fixed between rounds, so the transition kernel
    is the identity and the recursion is a plain likelihood product.  An
    empty observation returns the prior unchanged.
    """
    prior = np.asarray(prior, dtype=float)
    n = n_from_belief(prior)
    if not obs:
        _check_q(q)
        return prior.copy()
    weighted = prior * likelihood_vector(obs, q, n)
    # fsum is exactly rounded, so the normalizer (and with it the whole
    # update) is invariant under client relabelings.
    total = math.fsum(weighted)
    if not total > 0.0:
        raise RuntimeError("posterior normalizer vanished; prior or q invalid")
    return weighted / total


def should_block(belief: np.ndarray, eta_th: float) -> bool:
    """Stop auditing once some hypothesis is believed beyond ``eta_th``.

    The comparison is strict: a maximum exactly at the threshold keeps
    auditing.
    """
    if not 0.0 < eta_th < 1.0:
        raise ValueError(f"blocking threshold must lie in (0, 1), got {eta_th}")
    return bool(np.max(belief) > eta_th)


def map_hypothesis(belief: np.ndarray) -> int:
    """Most believed hypothesis; ties go to the lowest index."""
    return int(np.argmax(belief))


def marginal_malicious(belief: np.ndarray) -> np.ndarray:
    """Per-client malicious probability implied by the joint belief."""
    belief = np.asarray(belief, dtype=float)
    n = n_from_belief(belief)
    return bits_table(n).T.astype(float) @ belief
