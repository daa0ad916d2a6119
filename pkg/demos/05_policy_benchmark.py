"""Benchmark untrained policies and mechanisms on identical episode streams.

Evaluates the random and audit-everyone policies under the hierarchical
mechanism across malicious mixes, then the three mechanisms against each
other, using paired per-episode seed streams so differences come from the
policies and mechanisms alone.  Prints a compact table; feed the same rows
through the hiaudit CLI to get CSVs for the plotting package.
"""

from hiaudit import EnvConfig
from hiaudit.baselines import RandomPolicy, audit_all_policy
from hiaudit.experiments import ExperimentConfig, _cell_env, evaluate_cell

SEED = 2024
config = ExperimentConfig(env=EnvConfig(), master_seed=SEED, tests=100)
costs = config.resolved_costs()
print(f"cost draw: nu={costs.nu:.1f} varrho={costs.varrho:.0f} "
      f"rho={costs.rho_reward:.0f} K={costs.k_ip:.0f}\n")

policies = {"random": RandomPolicy(5), "audit_all": audit_all_policy(5)}

print(f"{'policy':>10} {'malicious':>9} {'misjudge':>9} {'t_stop':>7} {'total overhead':>15}")
for name, policy in policies.items():
    for mal in (0.2, 0.4, 0.6, 0.8):
        cell = _cell_env(config, None, mal)
        row = evaluate_cell(policy, "hiaudit", cell, costs, config.tests, SEED, name, 0.8, mal)
        print(f"{name:>10} {mal:>9.0%} {row.misjudgment_rate:>9.2f} "
              f"{row.mean_t_stop:>7.1f} {row.c_total:>15.0f}")

print(f"\n{'mechanism':>11} {'malicious':>9} {'misjudge':>9} {'c_model':>9} {'c_para':>11} {'c_mal':>8}")
for mechanism in ("hiaudit", "only_model", "only_param"):
    for mal in (0.2, 0.8):
        cell = _cell_env(config, None, mal)
        row = evaluate_cell(
            policies["audit_all"], mechanism, cell, costs, config.tests, SEED,
            "audit_all", 0.8, mal,
        )
        print(f"{mechanism:>11} {mal:>9.0%} {row.misjudgment_rate:>9.2f} "
              f"{row.c_model:>9.0f} {row.c_para:>11.0f} {row.c_mal:>8.0f}")
