"""Deterministic random-stream derivation from one master seed.

Every source of randomness in a run (hidden-state sampling, audit noise,
policy sampling, network initialization, replay batching, ...) pulls from
its own generator, derived from the master seed by a counter-based split:
``SeedSequence(master_seed, spawn_key=key)``.  SeedSequence hashing is pure
integer arithmetic, so the mapping (master seed, key) -> stream is stable
across platforms and numpy versions, and streams with distinct keys are
statistically independent.

Keys are tuples of small ints; the leading element names the consumer
(constants below), the rest are counters such as an episode index.
"""

from __future__ import annotations

import numpy as np

# Stream name constants.  Never renumber: run reproducibility depends on them.
STREAM_INIT = 0       # network parameter initialization
STREAM_ROLLOUT = 1    # training episodes (hidden state + audit noise)
STREAM_POLICY = 2     # diffusion/action sampling during training rollouts
STREAM_BATCH = 3      # replay-buffer batch selection
STREAM_TARGET = 4     # target-actor sampling inside TD targets
STREAM_EVAL = 5       # evaluation episodes
STREAM_COSTS = 6      # per-experiment cost-parameter draw
STREAM_TRAIN_EVAL = 7 # periodic evaluation during training


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``master_seed``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))
