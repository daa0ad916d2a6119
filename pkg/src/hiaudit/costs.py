"""Overhead accounting for the audit game and the misjudgment metric.

Three cost components are tracked per episode, in two distinct units:

* model-audit cost, CPU cycles: per-model audit price times audited count;
* parameter-audit cost, CPU cycles: per-sample replay price times the
  declared sample count of each client sent to parameter audit;
* retention cost, reward units: per-round incentives wasted on malicious
  clients still in the system, plus an intellectual-property penalty per
  malicious client that survives to the end.

Cycles and reward units are never mixed silently; the reported total is an
explicitly weighted sum (unit weights by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Per-client declared sample count used when a config does not list one.
DEFAULT_SAMPLES_PER_CLIENT = 100.0

# Draw ranges for experiment-level cost constants (one draw per run).
MODEL_AUDIT_CYCLES_RANGE = (1e2, 2e2)
SAMPLE_CYCLES_RANGE = (1e4, 4e4)


@dataclass(frozen=True)
class CostParams:
    """Prices for every overhead component.

    ``d`` lists the declared sample count per client (1-based client i at
    position i - 1); ``None`` means every client declares the default count.
    """

    nu: float = 150.0           # cycles per model audit
    varrho: float = 2.5e4       # cycles per audited data sample
    d: tuple[float, ...] | None = None
    rho_reward: float = 500.0   # reward units per client per round
    k_ip: float = 5000.0        # IP loss per surviving malicious client

    def __post_init__(self) -> None:
        if self.nu < 0 or self.varrho < 0 or self.rho_reward < 0 or self.k_ip < 0:
            raise ValueError("cost parameters must be nonnegative")
        if self.d is not None and any(di <= 0 for di in self.d):
            raise ValueError("declared sample counts must be positive")

    def samples_of(self, client: int) -> float:
        if self.d is None:
            return DEFAULT_SAMPLES_PER_CLIENT
        return float(self.d[client - 1])

    @classmethod
    def sample(cls, rng: np.random.Generator, n_clients: int) -> "CostParams":
        """Draw the per-run audit prices uniformly from their ranges."""
        nu = float(rng.uniform(*MODEL_AUDIT_CYCLES_RANGE))
        varrho = float(rng.uniform(*SAMPLE_CYCLES_RANGE))
        d = tuple([DEFAULT_SAMPLES_PER_CLIENT] * n_clients)
        return cls(nu=nu, varrho=varrho, d=d)


@dataclass
class CostLedger:
    """Accumulated per-episode overhead inputs and totals."""

    audited_counts: list[int] = field(default_factory=list)
    n_history: list[int] = field(default_factory=list)
    n_final: int = 0
    c_model: float = 0.0
    c_para: float = 0.0
    c_mal: float = 0.0


def model_audit_cost(nu: float, audited_counts: Iterable[int]) -> float:
    """Total model-audit cycles: price per audit times audits performed."""
    counts = list(audited_counts)
    if any(c < 0 for c in counts):
        raise ValueError("audited counts must be nonnegative")
    return float(nu) * float(sum(counts))


def param_audit_cost(varrho: float, d: Sequence[float], z: Iterable[int]) -> float:
    """Cycles to parameter-audit the clients in ``z`` (1-based indices)."""
    return float(sum(float(varrho) * float(d[i - 1]) for i in z))


def retention_cost(
    rho_reward: float, n_history: Iterable[int], n_final: int, k_ip: float
) -> float:
    """Reward units lost to malicious clients: per-round incentives while
    they sit in the system plus the IP penalty for each one that survives."""
    return float(rho_reward) * float(sum(n_history)) + float(n_final) * float(k_ip)


def misjudgment_rate(error_count: int, trials: int) -> float:
    """Fraction of audit tests that ended in a judgment error."""
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    return error_count / trials


def weighted_total(
    c_model: float,
    c_para: float,
    c_mal: float,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> float:
    """Combine the three components under explicit weights (default 1,1,1)."""
    w_model, w_para, w_mal = weights
    return w_model * c_model + w_para * c_para + w_mal * c_mal
