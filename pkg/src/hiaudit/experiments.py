"""Reproducible experiment harness: configs, runs, sweeps, metric files.

A run is fully described by one JSON config plus a master seed.  Every
random stream derives from the master seed (see :mod:`hiaudit.seeding`),
per-experiment cost constants are drawn once from their ranges unless
pinned in the config, and evaluation episodes are paired across grid cells
(episode k uses the same derived streams in every cell) so that cell and
mechanism comparisons differ only through the thing being compared.

Outputs per run directory: ``config.json`` (the resolved config, versions,
seed), ``training_log.csv`` + ``checkpoint.json`` for training runs, and
``metrics.csv`` + ``summary.json`` for evaluation-style runs.  CSVs are
UTF-8 with LF endings and a header row, and are byte-identical across
reruns of the same config and seed.
"""

from __future__ import annotations

import dataclasses
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__ as package_version
from .baselines import (
    MECHANISM_KINDS,
    POLICY_KINDS,
    TRAINABLE_POLICY_KINDS,
    finalize_episode,
    make_untrained_policy,
)
from .costs import CostParams
from .diffusion import AssPolicy, DiffusionSchedule, sample_action
from .env import EnvConfig
from . import env as env_mod
from .nets import (
    CHECKPOINT_VERSION,
    adam_to_dict,
    net_from_dict,
    net_to_dict,
)
from .seeding import STREAM_COSTS, STREAM_EVAL, derive_rng
from .training import (
    DiffusionActor,
    SoftmaxActor,
    TrainerConfig,
    TrainResult,
    train,
)

TRAINING_LOG_COLUMNS = (
    "step",
    "episode_reward",
    "actor_loss",
    "critic_loss",
    "eval_misjudgment",
    "eval_overhead",
    "wall_ms",
)

METRICS_COLUMNS = (
    "policy",
    "mechanism",
    "eta_th",
    "malicious_fraction",
    "seed",
    "misjudgment_rate",
    "c_model",
    "c_para",
    "c_mal",
    "c_total",
    "mean_t_stop",
    "episodes",
)


class ConfigError(ValueError):
    """A config file or CLI override that cannot be run."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs, serializable to a single JSON document."""

    env: EnvConfig = field(default_factory=EnvConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    costs: CostParams | None = None
    policy: str = "drl_ass"
    mechanism: str = "hiaudit"
    tests: int = 100
    eta_th_grid: tuple[float, ...] = ()
    malicious_grid: tuple[float, ...] = ()
    cell_exact_counts: bool = True
    greedy_eval: bool = False
    out_dir: str = "runs/experiment"
    master_seed: int = 1

    def __post_init__(self) -> None:
        if self.policy not in POLICY_KINDS:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {POLICY_KINDS}")
        if self.mechanism not in MECHANISM_KINDS:
            raise ConfigError(
                f"unknown mechanism {self.mechanism!r}; choose from {MECHANISM_KINDS}"
            )
        if self.tests < 1:
            raise ConfigError("tests must be positive")

    def resolved_costs(self) -> CostParams:
        """Pinned costs from the config, or the per-run draw."""
        if self.costs is not None:
            return self.costs
        rng = derive_rng(self.master_seed, STREAM_COSTS)
        return CostParams.sample(rng, self.env.n_clients)


def config_to_dict(config: ExperimentConfig) -> dict:
    d = dataclasses.asdict(config)
    if d["costs"] is not None and d["costs"]["d"] is not None:
        d["costs"]["d"] = list(d["costs"]["d"])
    d["eta_th_grid"] = list(d["eta_th_grid"])
    d["malicious_grid"] = list(d["malicious_grid"])
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    d.pop("versions", None)
    try:
        env_cfg = EnvConfig(**d.pop("env", {}))
        trainer_cfg = TrainerConfig(**d.pop("trainer", {}))
        costs_d = d.pop("costs", None)
        costs = None
        if costs_d is not None:
            if costs_d.get("d") is not None:
                costs_d = dict(costs_d)
                costs_d["d"] = tuple(costs_d["d"])
            costs = CostParams(**costs_d)
        d["eta_th_grid"] = tuple(d.get("eta_th_grid", ()))
        d["malicious_grid"] = tuple(d.get("malicious_grid", ()))
        return ExperimentConfig(env=env_cfg, trainer=trainer_cfg, costs=costs, **d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return config_from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _versions() -> dict:
    return {
        "package": package_version,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def write_resolved_config(config: ExperimentConfig, out_dir: Path) -> None:
    doc = config_to_dict(config)
    doc["costs"] = dataclasses.asdict(config.resolved_costs())
    doc["costs"]["d"] = list(doc["costs"]["d"]) if doc["costs"]["d"] is not None else None
    doc["versions"] = _versions()
    _write_json(doc, out_dir / "config.json")


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        # plain-float repr keeps full precision and is stable across reruns
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(rows: list[dict], columns: tuple[str, ...], path: Path) -> None:
    """Header + rows, UTF-8, LF endings, full float precision."""
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_cell(row.get(col)) for col in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_json(doc: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class MetricsRow:
    policy: str
    mechanism: str
    eta_th: float
    malicious_fraction: float
    seed: int
    misjudgment_rate: float
    c_model: float
    c_para: float
    c_mal: float
    c_total: float
    mean_t_stop: float
    episodes: int

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# --- checkpoints -----------------------------------------------------------


def checkpoint_to_dict(result: TrainResult, config: ExperimentConfig) -> dict:
    actor = result.actor
    doc: dict = {
        "version": CHECKPOINT_VERSION,
        "policy_kind": actor.kind,
        "n_clients": config.env.n_clients,
        "actor_net": net_to_dict(actor.net),
        "target_actor_net": net_to_dict(result.target_actor.net),
        "critics": {
            "q1": net_to_dict(result.critics.q1),
            "q2": net_to_dict(result.critics.q2),
            "q1_target": net_to_dict(result.critics.q1_target),
            "q2_target": net_to_dict(result.critics.q2_target),
        },
        "optimizers": {
            "actor": adam_to_dict(result.actor_opt),
            "q1": adam_to_dict(result.q1_opt),
            "q2": adam_to_dict(result.q2_opt),
        },
        "config": config_to_dict(config),
    }
    if isinstance(actor, DiffusionActor):
        p = actor.policy
        doc["diffusion"] = {
            "beta": [float(b) for b in p.schedule.beta],
            "embed_dim": p.embed_dim,
            "variance_convention": p.variance_convention,
            "strict_final_noise": p.strict_final_noise,
        }
    return doc


def save_checkpoint(result: TrainResult, config: ExperimentConfig, path: str | Path) -> None:
    _write_json(checkpoint_to_dict(result, config), Path(path))


def actor_from_checkpoint(doc: dict):
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('version')!r}")
    kind = doc["policy_kind"]
    net = net_from_dict(doc["actor_net"])
    if kind == "drl_ass":
        diff = doc["diffusion"]
        beta = np.asarray(diff["beta"], dtype=float)
        omega = 1.0 - beta
        omega_bar = np.cumprod(omega)
        schedule = DiffusionSchedule(
            beta=beta,
            omega=omega,
            omega_bar=omega_bar,
            omega_bar_prev=np.concatenate(([1.0], omega_bar[:-1])),
            tilde_beta=(1.0 - np.concatenate(([1.0], omega_bar[:-1]))) / (1.0 - omega_bar) * beta,
        )
        policy = AssPolicy(
            denoiser=net,
            schedule=schedule,
            n_clients=doc["n_clients"],
            embed_dim=diff["embed_dim"],
            variance_convention=diff["variance_convention"],
            strict_final_noise=diff["strict_final_noise"],
        )
        return DiffusionActor(policy)
    if kind == "sac_categorical":
        return SoftmaxActor(net)
    raise ConfigError(f"checkpoint holds unknown policy kind {kind!r}")


def load_checkpoint(path: str | Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return actor_from_checkpoint(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot load checkpoint {path}: {exc}") from exc


# --- evaluation ------------------------------------------------------------


def _resolve_policy(config: ExperimentConfig, checkpoint: str | Path | None):
    if config.policy in TRAINABLE_POLICY_KINDS:
        if checkpoint is None:
            raise ConfigError(f"policy {config.policy!r} requires --checkpoint")
        actor = load_checkpoint(checkpoint)
        if actor.kind != config.policy:
            raise ConfigError(
                f"checkpoint holds {actor.kind!r} but config asks for {config.policy!r}"
            )
        return actor
    return make_untrained_policy(config.policy, config.env.n_clients)


def _cell_env(config: ExperimentConfig, eta_th: float | None, malicious: float | None) -> EnvConfig:
    env_cfg = config.env
    kwargs: dict = {}
    if eta_th is not None:
        kwargs["eta_th"] = eta_th
    if malicious is not None:
        if config.cell_exact_counts:
            kwargs["malicious_count"] = round(malicious * env_cfg.n_clients)
            kwargs["malicious_fraction"] = malicious
        else:
            kwargs["malicious_fraction"] = malicious
            kwargs["malicious_count"] = None
    if kwargs:
        env_cfg = dataclasses.replace(env_cfg, **kwargs)
    return env_cfg


def run_episode(
    policy,
    mechanism: str,
    env_cfg: EnvConfig,
    costs: CostParams,
    master_seed: int,
    episode_index: int,
    greedy: bool = False,
) -> env_mod.EpisodeResult:
    """One evaluation episode with paired, per-episode derived streams."""
    rng_env = derive_rng(master_seed, STREAM_EVAL, episode_index, 0)
    rng_policy = derive_rng(master_seed, STREAM_EVAL, episode_index, 1)
    state = env_mod.reset(env_cfg, rng_env)
    if mechanism != "only_param":
        while not state.done:
            pi = policy.distribution(state.belief, rng_policy)
            action = sample_action(pi, rng_policy, greedy=greedy)
            env_mod.step(state, action, env_cfg, rng_env)
    return finalize_episode(mechanism, state, env_cfg, costs)


def evaluate_cell(
    policy,
    mechanism: str,
    env_cfg: EnvConfig,
    costs: CostParams,
    tests: int,
    master_seed: int,
    policy_name: str,
    eta_th: float,
    malicious_fraction: float,
    greedy: bool = False,
) -> MetricsRow:
    errors = 0
    c_model = c_para = c_mal = t_stop = 0.0
    for episode in range(tests):
        result = run_episode(policy, mechanism, env_cfg, costs, master_seed, episode, greedy)
        errors += int(result.misjudged)
        c_model += result.c_model
        c_para += result.c_para
        c_mal += result.c_mal
        t_stop += result.t_stop
    mean = lambda x: x / tests  # noqa: E731
    return MetricsRow(
        policy=policy_name,
        mechanism=mechanism,
        eta_th=float(eta_th),
        malicious_fraction=float(malicious_fraction),
        seed=int(master_seed),
        misjudgment_rate=errors / tests,
        c_model=mean(c_model),
        c_para=mean(c_para),
        c_mal=mean(c_mal),
        c_total=mean(c_model + c_para + c_mal),
        mean_t_stop=mean(t_stop),
        episodes=tests,
    )


def _grid(config: ExperimentConfig) -> list[tuple[float, float | None]]:
    etas = list(config.eta_th_grid) or [config.env.eta_th]
    mals = list(config.malicious_grid) or [None]
    return [(eta, mal) for eta in etas for mal in mals]


def run_evaluate(
    config: ExperimentConfig, checkpoint: str | Path | None = None
) -> list[MetricsRow]:
    policy = _resolve_policy(config, checkpoint)
    costs = config.resolved_costs()
    rows = []
    for eta, mal in _grid(config):
        env_cfg = _cell_env(config, eta, mal)
        mal_value = mal if mal is not None else config.env.malicious_fraction
        rows.append(
            evaluate_cell(
                policy,
                config.mechanism,
                env_cfg,
                costs,
                config.tests,
                config.master_seed,
                config.policy,
                eta,
                mal_value,
                greedy=config.greedy_eval,
            )
        )
    return rows


def run_sweep(config: ExperimentConfig, checkpoint: str | Path | None = None) -> list[MetricsRow]:
    if not config.eta_th_grid or not config.malicious_grid:
        raise ConfigError("sweep needs nonempty --eta-th and --malicious grids")
    return run_evaluate(config, checkpoint)


def run_compare(config: ExperimentConfig, checkpoint: str | Path | None = None) -> list[MetricsRow]:
    """All three mechanisms over the malicious grid at the config threshold."""
    mals = list(config.malicious_grid) or [0.2, 0.4, 0.6, 0.8]
    policy = _resolve_policy(config, checkpoint)
    costs = config.resolved_costs()
    rows = []
    for mechanism in MECHANISM_KINDS:
        for mal in mals:
            env_cfg = _cell_env(config, None, mal)
            rows.append(
                evaluate_cell(
                    policy,
                    mechanism,
                    env_cfg,
                    costs,
                    config.tests,
                    config.master_seed,
                    config.policy,
                    config.env.eta_th,
                    mal,
                    greedy=config.greedy_eval,
                )
            )
    return rows


def summarize(rows: list[MetricsRow], config: ExperimentConfig) -> dict:
    return {
        "master_seed": config.master_seed,
        "tests_per_cell": config.tests,
        "seed_scheme": "SeedSequence(master_seed, spawn_key=(eval, episode, stream)); "
        "episode keys are shared across cells (paired design)",
        "rows": [r.as_dict() for r in rows],
    }


# --- run drivers (one per CLI verb) ----------------------------------------


def run_train_command(config: ExperimentConfig, timings: bool = False, progress: bool = False) -> Path:
    if config.policy not in TRAINABLE_POLICY_KINDS:
        raise ConfigError(
            f"policy {config.policy!r} has nothing to train; choose from {TRAINABLE_POLICY_KINDS}"
        )
    trainer_cfg = config.trainer
    if config.policy == "sac_categorical" and not trainer_cfg.target_entropy_term:
        # the categorical-SAC baseline is defined by its soft TD target
        trainer_cfg = dataclasses.replace(trainer_cfg, target_entropy_term=True)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(config, out_dir)
    result = train(
        config.env,
        trainer_cfg,
        master_seed=config.master_seed,
        policy_kind=config.policy,
        cost_params=config.resolved_costs(),
        timings=timings,
        progress=progress,
    )
    write_csv(result.log_rows, TRAINING_LOG_COLUMNS, out_dir / "training_log.csv")
    save_checkpoint(result, config, out_dir / "checkpoint.json")
    return out_dir


def _run_metrics_command(config: ExperimentConfig, rows: list[MetricsRow]) -> Path:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(config, out_dir)
    write_csv([r.as_dict() for r in rows], METRICS_COLUMNS, out_dir / "metrics.csv")
    _write_json(summarize(rows, config), out_dir / "summary.json")
    return out_dir


def run_evaluate_command(config: ExperimentConfig, checkpoint=None) -> Path:
    return _run_metrics_command(config, run_evaluate(config, checkpoint))


def run_sweep_command(config: ExperimentConfig, checkpoint=None) -> Path:
    return _run_metrics_command(config, run_sweep(config, checkpoint))


def run_compare_command(config: ExperimentConfig, checkpoint=None) -> Path:
    return _run_metrics_command(config, run_compare(config, checkpoint))
