"""The three environments and their exact oracles.

Each environment is deterministic, so a centralized breadth-first search (or
plain enumeration) gives the exact optimum, and any episode can be audited by
re-simulating its action sequence.
"""

import numpy as np

from manger.envs import make_env, oracle_optimal, resimulate

for name in ("symmetry_break", "role_grid", "novelty_chain"):
    env = make_env(name)
    best, steps = oracle_optimal(env)
    print(f"{name}: {env.n_agents} agents, |A| = {env.n_actions}, horizon {env.max_steps}"
          f" -> optimal return {best:.2f} in {steps} steps")

# walk the role grid's optimal plan: agent 2 holds the switch open while
# agent 1 runs through the door
env = make_env("role_grid")
env.reset(0)
stay = 4
plan = [
    [stay, stay, 0], [stay, stay, 0],          # switch-holder walks up
    [stay, 3, stay], [stay, 0, stay],          # runner lines up with the door
    [stay, 3, stay], [stay, 3, stay], [stay, 3, stay],  # through and to the goal
]
total = 0.0
for t, joint in enumerate(plan):
    obs, state, reward, done, info = env.step(joint)
    total += reward
    print(f"t={t}: door={'open' if state[-1] else 'shut'} reward={reward:+.2f}"
          + ("  <- goal!" if info["goal"] else ""))
    if done:
        break
print(f"plan return {total:.2f}; oracle optimum {oracle_optimal(env)[0]:.2f}")

# audit a random episode against re-simulation
env = make_env("novelty_chain")
rng = np.random.default_rng(0)
env.reset(0)
actions, logged = [], 0.0
for _ in range(env.max_steps):
    joint = rng.integers(0, env.n_actions, env.n_agents)
    actions.append(joint)
    _, _, reward, done, _ = env.step(joint)
    logged += reward
    if done:
        break
print(f"\nrandom chain episode: logged return {logged:.1f}, "
      f"re-simulated {resimulate(env, np.array(actions)):.1f}")
