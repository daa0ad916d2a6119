"""Peek inside the diffusion actor's reverse chain.

An untrained actor is asked for an action distribution: standard-normal
noise is denoised step by step, conditioned on the belief, and the final
logits go through a softmax.  The script prints the noise schedule, traces
one chain, and shows that a frozen noise stream reproduces the same
distribution while fresh draws move it.
"""

import numpy as np

from hiaudit import make_policy, uniform_belief
from hiaudit.diffusion import generate, reverse_step, sample_action

N = 3
policy = make_policy(N, np.random.default_rng(0))
s = policy.schedule

print("noise schedule (y: beta, cumulative omega-bar, posterior amplitude):")
for y in range(1, s.steps + 1):
    print(f"  y={y}: beta={s.beta[y-1]:.4f}  omega_bar={s.omega_bar[y-1]:.4f}  "
          f"tilde_beta={s.tilde_beta[y-1]:.4f}")

belief = uniform_belief(N)
rng = np.random.default_rng(42)
x = rng.standard_normal(policy.action_dim)
print("\none reverse chain from pure noise:")
print(f"  x_Y   norm={np.linalg.norm(x):.3f}")
for y in range(s.steps, 0, -1):
    x = reverse_step(x, y, belief, policy, rng)
    print(f"  x_{y-1}   norm={np.linalg.norm(x):.3f}")

pi_frozen_a = generate(belief, policy, np.random.default_rng(5))
pi_frozen_b = generate(belief, policy, np.random.default_rng(5))
pi_fresh = generate(belief, policy, np.random.default_rng(6))
print("\nfrozen stream reproduces:", np.allclose(pi_frozen_a, pi_frozen_b))
print("fresh stream differs:    ", not np.allclose(pi_frozen_a, pi_fresh))

rng = np.random.default_rng(9)
draws = [sample_action(generate(belief, policy, rng), rng) for _ in range(2000)]
counts = np.bincount(draws, minlength=policy.action_dim)
print("\naction histogram over 2000 draws (untrained actor):")
print(" ", counts.tolist())
print("  most sampled action:", int(np.argmax(counts)),
      "=> audits clients", [c + 1 for c in range(N) if (int(np.argmax(counts)) >> (N - 1 - c)) & 1])
