"""Hierarchical-audit simulator for federated learning.

Exact Bayesian belief tracking over joint client-honesty hypotheses, a
noisy-audit POMDP with a cost ledger, a diffusion-model actor trained by a
double-critic actor-critic loop, baseline policies and mechanisms, and a
seeded experiment harness.
"""

__version__ = "0.1.0"

from .belief import (
    AuditSelection,
    hypothesis_bits,
    hypothesis_index,
    likelihood_vector,
    malicious_clients,
    map_hypothesis,
    marginal_malicious,
    observation_likelihood,
    posterior_update,
    should_block,
    uniform_belief,
)
from .costs import (
    CostLedger,
    CostParams,
    misjudgment_rate,
    model_audit_cost,
    param_audit_cost,
    retention_cost,
    weighted_total,
)
from .diffusion import (
    AssPolicy,
    DiffusionSchedule,
    generate,
    generate_batch,
    make_policy,
    make_schedule,
    predict_x0,
    reverse_mean,
    reverse_step,
    sample_action,
)
from .env import (
    EnvConfig,
    EnvState,
    EpisodeResult,
    StepOutcome,
    abllr,
    finalize,
    observe,
    reset,
    reward,
    step,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    MetricsRow,
    load_checkpoint,
    load_config,
    run_compare,
    run_evaluate,
    run_sweep,
)
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
    sinusoidal_embed,
)
from .training import (
    CriticPair,
    ReplayMemory,
    TrainerConfig,
    Transition,
    actor_loss_and_grads,
    critic_loss_and_grads,
    critic_min,
    soft_update,
    td_target,
    train,
)
