"""Train the diffusion actor on a small board and watch the reward move.

Three clients keep the action space at eight and one training step well
under a second, so a few hundred episodes run in about a minute.  The
printout shows the smoothed episode reward and the periodic evaluation
snapshots the trainer takes along the way.
"""

import numpy as np

from hiaudit import EnvConfig, TrainerConfig
from hiaudit.training import train

env = EnvConfig(n_clients=3, q=0.2, eta_th=0.8, max_rounds=20)
trainer = TrainerConfig(
    max_steps=400,
    warmup=100,
    batch_size=32,
    episodes_per_eval=100,
    eval_episodes=40,
)

result = train(env, trainer, master_seed=1, policy_kind="drl_ass", progress=True)

rewards = [row["episode_reward"] for row in result.log_rows]
window = 50
print("\nsmoothed episode reward:")
for end in range(window, len(rewards) + 1, window):
    chunk = rewards[end - window : end]
    print(f"  episodes {end - window + 1:>3}-{end:>3}: {sum(chunk) / len(chunk):+.3f}")

evals = [row for row in result.log_rows if row["eval_misjudgment"] is not None]
print("\nperiodic evaluations (misjudgment rate, mean overhead):")
for row in evals:
    print(f"  step {row['step']:>3}: {row['eval_misjudgment']:.3f}  {row['eval_overhead']:.0f}")

rng = np.random.default_rng(0)
uniform = np.full(8, 0.125)
pi = result.actor.distribution(uniform, rng)
print("\ntrained action distribution at the uniform belief:")
print(" ", np.round(pi, 3).tolist())
