"""Environment interaction: episode generation under annealed epsilon-greedy,
episode-structured FIFO replay, and uniform batch sampling with padding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .envs import CoopEnv
from .nets import (
    AgentNetParams,
    augment_obs,
    select_action,
    sep_head,
    trunk_q_com,
    trunk_step,
)
from .numcore import RngStream, Tensor, no_grad


@dataclass
class Episode:
    """One finished episode; only filled steps are stored (no padding)."""

    obs: np.ndarray       # (L, N, obs_dim), raw observations without agent ids
    state: np.ndarray     # (L, state_dim)
    actions: np.ndarray   # (L, N) int64
    reward: np.ndarray    # (L,)
    terminated: bool      # environment-reported terminal flag

    @property
    def length(self) -> int:
        return self.obs.shape[0]

    @property
    def total_reward(self) -> float:
        return float(self.reward.sum())


@dataclass
class EpisodeBatch:
    """Episodes padded to a common length with a validity mask."""

    obs: np.ndarray       # (B, T, N, obs_dim)
    state: np.ndarray     # (B, T, state_dim)
    actions: np.ndarray   # (B, T, N)
    reward: np.ndarray    # (B, T)
    filled: np.ndarray    # (B, T) bool, True on real steps
    lengths: np.ndarray   # (B,)

    @property
    def batch_size(self) -> int:
        return self.obs.shape[0]

    @property
    def max_len(self) -> int:
        return self.obs.shape[1]

    @property
    def n_agents(self) -> int:
        return self.obs.shape[2]


class ReplayBuffer:
    """FIFO ring of episodes; eviction is strictly oldest-first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self._episodes: List[Episode] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._episodes)

    def add(self, episode: Episode) -> None:
        if len(self._episodes) < self.capacity:
            self._episodes.append(episode)
        else:
            self._episodes[self._next] = episode
            self._next = (self._next + 1) % self.capacity

    def episodes(self) -> List[Episode]:
        return list(self._episodes)

    def get(self, idx: int) -> Episode:
        return self._episodes[idx]


@dataclass
class EpsSchedule:
    eps_start: float = 1.0
    eps_finish: float = 0.05
    anneal_steps: int = 100_000


def epsilon_at(t: int, schedule: EpsSchedule) -> float:
    """Linear interpolation from eps_start to eps_finish, clamped after anneal."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if schedule.anneal_steps <= 0 or t >= schedule.anneal_steps:
        return schedule.eps_finish
    frac = t / schedule.anneal_steps
    return schedule.eps_start + (schedule.eps_finish - schedule.eps_start) * frac


def policy_step(
    params: AgentNetParams,
    obs: np.ndarray,
    hidden: np.ndarray,
    obs_agent_id: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Greedy-forward all agents one step: returns (q_sum (N, A), next hidden)."""
    n = params.n_agents
    x = augment_obs(obs, np.arange(n), n, obs_agent_id)
    with no_grad():
        view = params.view()
        h = trunk_step(view, Tensor(x), Tensor(hidden))
        q_com = trunk_q_com(view, h).data
        q_sum = q_com.copy()
        if params.sep_coef != 0.0:
            for i in range(n):
                q_sum[i] += params.sep_coef * sep_head(view, i, Tensor(h.data[i])).data
    return q_sum, h.data


def run_episode(
    env: CoopEnv,
    params: AgentNetParams,
    eps: float,
    rng: RngStream,
    greedy: bool = False,
    obs_agent_id: bool = False,
) -> Episode:
    """Roll one episode.  Hidden states start at zero; with the greedy flag the
    RNG is consumed only by the environment interface, never by selection."""
    obs, state = env.reset(seed=rng.integers(2**31))
    hidden = np.zeros((params.n_agents, params.hidden_dim))
    eps_eff = 0.0 if greedy else eps
    obs_steps, state_steps, act_steps, rew_steps = [], [], [], []
    terminated = False
    for _ in range(env.max_steps):
        q_sum, hidden = policy_step(params, obs, hidden, obs_agent_id)
        avail = env.avail_actions()
        joint = np.array(
            [select_action(q_sum[i], avail[i], eps_eff, rng) for i in range(params.n_agents)],
            dtype=np.int64,
        )
        obs_steps.append(obs)
        state_steps.append(state)
        act_steps.append(joint)
        next_obs, next_state, reward, terminated, _ = env.step(joint)
        rew_steps.append(reward)
        obs, state = next_obs, next_state
        if terminated:
            break
    return Episode(
        obs=np.asarray(obs_steps),
        state=np.asarray(state_steps),
        actions=np.asarray(act_steps),
        reward=np.asarray(rew_steps, dtype=np.float64),
        terminated=terminated,
    )


def collect_interval(
    envs: Sequence[CoopEnv],
    params: AgentNetParams,
    eps: float,
    streams: Sequence[RngStream],
    obs_agent_id: bool = False,
) -> List[Episode]:
    """One episode per env, merged in env-index order.

    Each env owns its RngStream, so the merged list is independent of any
    execution interleaving; running the loop sequentially is already the
    canonical order.
    """
    if len(envs) != len(streams):
        raise ValueError("one RngStream per environment is required")
    return [
        run_episode(env, params, eps, stream, obs_agent_id=obs_agent_id)
        for env, stream in zip(envs, streams)
    ]


def sample(replay: ReplayBuffer, batch_size: int, rng: RngStream) -> Optional[EpisodeBatch]:
    """Uniform sample without replacement, padded to the longest episode.

    Returns None while the buffer holds fewer than batch_size episodes.
    """
    if len(replay) < batch_size:
        return None
    idx = rng.choice_without_replacement(len(replay), batch_size)
    episodes = [replay.get(int(i)) for i in idx]
    return pack_episodes(episodes)


def pack_episodes(episodes: Sequence[Episode]) -> EpisodeBatch:
    b = len(episodes)
    lengths = np.array([ep.length for ep in episodes], dtype=np.int64)
    t_max = int(lengths.max())
    n, obs_dim = episodes[0].obs.shape[1], episodes[0].obs.shape[2]
    state_dim = episodes[0].state.shape[1]
    obs = np.zeros((b, t_max, n, obs_dim))
    state = np.zeros((b, t_max, state_dim))
    actions = np.zeros((b, t_max, n), dtype=np.int64)
    reward = np.zeros((b, t_max))
    filled = np.zeros((b, t_max), dtype=bool)
    for k, ep in enumerate(episodes):
        m = ep.length
        obs[k, :m] = ep.obs
        state[k, :m] = ep.state
        actions[k, :m] = ep.actions
        reward[k, :m] = ep.reward
        filled[k, :m] = True
    return EpisodeBatch(obs, state, actions, reward, filled, lengths)
