"""Three small cooperative environments with exact centralized oracles.

All three are deterministic given actions, share one team reward, and
enforce their own horizon, which keeps the oracle values exact and the
test tolerances tight.
"""

from __future__ import annotations

from collections import deque
from typing import Dict, Optional, Tuple

import numpy as np


class EnvContractError(RuntimeError):
    """The environment was driven outside its contract (e.g. step after done)."""


class CoopEnv:
    """Deterministic fully cooperative environment interface.

    Attributes: n_agents, n_actions, obs_dim, state_dim, max_steps.
    ``reset(seed)`` -> (obs (N, obs_dim), state); ``step(joint_action)`` ->
    (obs, state, shared reward, terminated, info).  The seed parameter is
    accepted for interface uniformity; the dynamics are deterministic.
    """

    n_agents: int
    n_actions: int
    obs_dim: int
    state_dim: int
    max_steps: int
    name: str

    def __init__(self) -> None:
        self._t = 0
        self._done = True

    def avail_actions(self) -> np.ndarray:
        return np.ones((self.n_agents, self.n_actions), dtype=bool)

    def reset(self, seed: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def step(self, joint_action) -> Tuple[np.ndarray, np.ndarray, float, bool, Dict]:
        raise NotImplementedError

    def _check_step(self, joint_action) -> np.ndarray:
        if self._done:
            raise EnvContractError(f"{self.name}: step() after termination")
        joint = np.asarray(joint_action, dtype=np.int64)
        if joint.shape != (self.n_agents,):
            raise EnvContractError(f"{self.name}: joint action shape {joint.shape}")
        if ((joint < 0) | (joint >= self.n_actions)).any():
            raise EnvContractError(f"{self.name}: action out of range: {joint}")
        return joint


class SymmetryBreak(CoopEnv):
    """Two agents, one step, identical constant observations.

    Reward 1 exactly when the two actions differ.  Without any mechanism to
    break symmetry, shared-parameter greedy agents must pick the same action
    and score 0.
    """

    n_agents = 2
    n_actions = 2
    obs_dim = 1
    state_dim = 1
    max_steps = 1
    name = "symmetry_break"

    def reset(self, seed=None):
        self._t = 0
        self._done = False
        return np.ones((2, 1)), np.ones(1)

    def step(self, joint_action):
        joint = self._check_step(joint_action)
        reward = 1.0 if joint[0] != joint[1] else 0.0
        self._done = True
        self._t = 1
        return np.ones((2, 1)), np.ones(1), reward, True, {}


# RoleGrid geometry: 5x5 cells addressed (x, y); column x=2 is a wall except
# the door cell (2, 2), passable only while some agent stands on the switch.
_GRID = 5
_ROLE_STARTS = ((0, 0), (0, 1), (0, 2))
_SWITCH = (0, 4)
_GOAL = (4, 2)
_DOOR = (2, 2)
_MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0), (0, 0))  # up, down, left, right, stay


class RoleGrid(CoopEnv):
    """Role-specialization gridworld: one agent must hold a switch that opens
    the only door to the goal, so the switch-holder sacrifices its own chance
    to score.

    Reward is +10 on the first goal arrival (which ends the episode) and
    -0.01 per step; blocked moves become stay; agents may share cells.
    """

    n_agents = 3
    n_actions = 5
    obs_dim = 6
    state_dim = 7
    max_steps = 50
    name = "role_grid"

    def reset(self, seed=None):
        self._t = 0
        self._done = False
        self._pos = [list(p) for p in _ROLE_STARTS]
        self._door_open = False
        return self._obs(), self._state()

    def _obs(self) -> np.ndarray:
        rows = []
        for x, y in self._pos:
            rows.append([
                x / 4.0,
                y / 4.0,
                1.0 if self._door_open else 0.0,
                1.0 if (x, y) == _SWITCH else 0.0,
                (_GOAL[0] - x) / 4.0,
                (_GOAL[1] - y) / 4.0,
            ])
        return np.asarray(rows)

    def _state(self) -> np.ndarray:
        flat = [c / 4.0 for p in self._pos for c in p]
        flat.append(1.0 if self._door_open else 0.0)
        return np.asarray(flat)

    def step(self, joint_action):
        joint = self._check_step(joint_action)
        for i, act in enumerate(joint):
            self._pos[i] = list(_role_move(tuple(self._pos[i]), int(act), self._door_open))
        self._door_open = any(tuple(p) == _SWITCH for p in self._pos)
        reached = any(tuple(p) == _GOAL for p in self._pos)
        reward = -0.01 + (10.0 if reached else 0.0)
        self._t += 1
        self._done = reached or self._t >= self.max_steps
        return self._obs(), self._state(), reward, self._done, {"goal": reached}


def _role_move(pos: Tuple[int, int], action: int, door_open: bool) -> Tuple[int, int]:
    dx, dy = _MOVES[action]
    nx, ny = pos[0] + dx, pos[1] + dy
    if not (0 <= nx < _GRID and 0 <= ny < _GRID):
        return pos
    if nx == 2 and (nx, ny) != _DOOR:
        return pos
    if (nx, ny) == _DOOR and not door_open:
        return pos
    return nx, ny


class NoveltyChain(CoopEnv):
    """Two agents walk independent chains of length 10; reward 1 and
    termination only when both stand on the last cell simultaneously.

    Deep cells are exponentially rare under random walks, which makes the
    terminal cells genuinely novel observations.
    """

    n_agents = 2
    n_actions = 2  # left, right
    chain_len = 10
    obs_dim = 10
    state_dim = 20
    max_steps = 40
    name = "novelty_chain"

    def reset(self, seed=None):
        self._t = 0
        self._done = False
        self._pos = [0, 0]
        return self._obs(), self._state()

    def _obs(self) -> np.ndarray:
        rows = np.zeros((2, self.chain_len))
        rows[0, self._pos[0]] = 1.0
        rows[1, self._pos[1]] = 1.0
        return rows

    def _state(self) -> np.ndarray:
        return self._obs().reshape(-1)

    def step(self, joint_action):
        joint = self._check_step(joint_action)
        for i, act in enumerate(joint):
            delta = 1 if act == 1 else -1
            self._pos[i] = min(self.chain_len - 1, max(0, self._pos[i] + delta))
        solved = self._pos[0] == self.chain_len - 1 and self._pos[1] == self.chain_len - 1
        reward = 1.0 if solved else 0.0
        self._t += 1
        self._done = solved or self._t >= self.max_steps
        return self._obs(), self._state(), reward, self._done, {"goal": solved}


ENV_REGISTRY = {
    SymmetryBreak.name: SymmetryBreak,
    RoleGrid.name: RoleGrid,
    NoveltyChain.name: NoveltyChain,
}


def make_env(name: str) -> CoopEnv:
    try:
        return ENV_REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; known: {sorted(ENV_REGISTRY)}") from None


# ---------------------------------------------------------------------------
# oracles


def oracle_optimal(env: CoopEnv) -> Tuple[float, int]:
    """(best achievable return, minimal steps) under centralized control."""
    if isinstance(env, SymmetryBreak):
        best = max(
            _simulate(SymmetryBreak(), [(a0, a1)])
            for a0 in range(2)
            for a1 in range(2)
        )
        return best, 1
    if isinstance(env, RoleGrid):
        steps = _bfs_role_grid()
        return 10.0 - 0.01 * steps, steps
    if isinstance(env, NoveltyChain):
        steps = _bfs_novelty_chain()
        return 1.0, steps
    raise ValueError(f"no oracle for environment {env.name!r}")


def resimulate(env: CoopEnv, actions: np.ndarray) -> float:
    """Total reward of replaying an action sequence on a fresh instance."""
    fresh = make_env(env.name)
    return _simulate(fresh, np.asarray(actions, dtype=np.int64))


def _simulate(env: CoopEnv, actions) -> float:
    env.reset(seed=0)
    total = 0.0
    for joint in actions:
        _, _, reward, done, _ = env.step(joint)
        total += reward
        if done:
            break
    return total


def _bfs_role_grid() -> int:
    """Joint-state BFS over all three agent positions; door state is a
    function of positions, so positions alone form the state."""
    start = _ROLE_STARTS
    frontier = deque([start])
    dist = {start: 0}
    single_moves = {
        (pos, act, door): _role_move(pos, act, door)
        for pos in [(x, y) for x in range(_GRID) for y in range(_GRID)]
        for act in range(5)
        for door in (False, True)
    }
    while frontier:
        cur = frontier.popleft()
        d = dist[cur]
        door = any(p == _SWITCH for p in cur)
        for a0 in range(5):
            p0 = single_moves[(cur[0], a0, door)]
            for a1 in range(5):
                p1 = single_moves[(cur[1], a1, door)]
                for a2 in range(5):
                    nxt = (p0, p1, single_moves[(cur[2], a2, door)])
                    if any(p == _GOAL for p in nxt):
                        return d + 1
                    if nxt not in dist:
                        dist[nxt] = d + 1
                        frontier.append(nxt)
    raise RuntimeError("RoleGrid goal unreachable; environment definition broken")


def _bfs_novelty_chain() -> int:
    n = NoveltyChain.chain_len
    start = (0, 0)
    goal = (n - 1, n - 1)
    frontier = deque([start])
    dist = {start: 0}
    while frontier:
        cur = frontier.popleft()
        if cur == goal:
            return dist[cur]
        for d0 in (-1, 1):
            for d1 in (-1, 1):
                nxt = (
                    min(n - 1, max(0, cur[0] + d0)),
                    min(n - 1, max(0, cur[1] + d1)),
                )
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    frontier.append(nxt)
    raise RuntimeError("NoveltyChain goal unreachable; environment definition broken")
