"""Command-line entry point: train / evaluate / sweep / compare.

All verbs read one JSON config (every field optional) and apply flag
overrides on top.  Exit codes: 0 success, 2 configuration error,
3 training divergence.
"""

from __future__ import annotations

import argparse
import os
import sys

# Pin BLAS to one thread before numpy loads so reruns are byte-identical.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from .experiments import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    run_compare_command,
    run_evaluate_command,
    run_sweep_command,
    run_train_command,
)
from .nets import TrainingDivergence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse float list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiaudit",
        description="Hierarchical-audit simulator: train and evaluate audit-selection policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("train", "train a policy and write its checkpoint and training log"),
        ("evaluate", "evaluate a policy/mechanism over fresh audit episodes"),
        ("sweep", "evaluate over an eta-th x malicious-fraction grid"),
        ("compare", "run all three mechanisms on identical episode streams"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--policy", help="policy kind (drl_ass, sac_categorical, random, audit_all, audit_none)")
        p.add_argument("--mechanism", help="mechanism kind (hiaudit, only_model, only_param)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--tests", type=int, help="evaluation episodes per cell")
        p.add_argument("--eta-th", dest="eta_th", help="comma-separated blocking thresholds")
        p.add_argument("--malicious", help="comma-separated malicious fractions")
        p.add_argument("--checkpoint", help="checkpoint JSON (required for trained policies)")
        p.add_argument("--steps", type=int, help="override trainer max_steps")
        p.add_argument("--greedy", action="store_true", help="evaluate with argmax actions")
        p.add_argument("--timings", action="store_true",
                       help="record wall-clock ms in the training log (breaks byte-exact reruns)")
        p.add_argument("--progress", action="store_true", help="print periodic training progress")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    doc = config_to_dict(config)
    if args.policy:
        doc["policy"] = args.policy
    if args.mechanism:
        doc["mechanism"] = args.mechanism
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.out:
        doc["out_dir"] = args.out
    if args.tests is not None:
        doc["tests"] = args.tests
    if args.eta_th:
        doc["eta_th_grid"] = list(_parse_float_list(args.eta_th))
    if args.malicious:
        doc["malicious_grid"] = list(_parse_float_list(args.malicious))
    if args.steps is not None:
        doc["trainer"] = dict(doc["trainer"], max_steps=args.steps)
    if args.greedy:
        doc["greedy_eval"] = True
    return config_from_dict(doc)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        if args.command == "train":
            out = run_train_command(config, timings=args.timings, progress=args.progress)
        elif args.command == "evaluate":
            out = run_evaluate_command(config, args.checkpoint)
        elif args.command == "sweep":
            out = run_sweep_command(config, args.checkpoint)
        elif args.command == "compare":
            out = run_compare_command(config, args.checkpoint)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergence as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
