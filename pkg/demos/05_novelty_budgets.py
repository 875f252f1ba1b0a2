"""How observation novelty turns into integer extra-update budgets.

An agent whose recent observations are unusual (relative to the whole batch)
earns up to `beta` additional masked updates; everyone else gets none.  The
budget rule is floor(alpha * (agent mean - pool mean) / pool std), clamped to
[0, beta], with a guard for novelty-flat batches.
"""

import numpy as np

from manger.novelty import extra_updates, h_mask

rng = np.random.default_rng(0)

b, t, n = 8, 6, 3
filled = np.ones((b, t), dtype=bool)
filled[2, 4:] = False  # one shorter episode

# agent 2 wandered somewhere new: its novelty runs hot
per_obs = rng.uniform(0.1, 0.3, (b, t, n))
per_obs[:, :, 2] += rng.uniform(0.3, 0.6, (b, t))
per_obs = np.where(filled[..., None], per_obs, 0.0)

for alpha in (0.5, 1.0, 2.0, 4.0):
    report = extra_updates(per_obs, filled, alpha=alpha, beta=3)
    print(f"alpha={alpha:<4} agent means {np.round(report.agent_mean, 3)} "
          f"pool mean {report.pooled_mean:.3f} std {report.pooled_std:.3f} "
          f"-> budgets {report.extra} mask {h_mask(report.extra)}")

# the budget loop: decrement until everyone is exhausted
report = extra_updates(per_obs, filled, alpha=4.0, beta=3)
budget = report.extra.copy()
print("\nmasked-update loop:")
iteration = 0
while (budget > 0).any():
    print(f"  iteration {iteration}: update heads of agents {np.flatnonzero(h_mask(budget))}")
    budget -= 1
    iteration += 1

# flat novelty earns nothing
flat = np.full((b, t, n), 0.25)
flat = np.where(filled[..., None], flat, 0.0)
print("\nflat batch budgets:", extra_updates(flat, filled, alpha=4.0, beta=3).extra)
