"""Diversity diagnostic: cross-agent cosine similarity of Q-vectors.

Every agent's Q-vector is computed from the same probe observation and a
zero hidden state; entry (i, j) is the mean cosine similarity over probes.
The default probe set is every distinct observation seen in a greedy
rollout, which keeps the diagnostic reproducible.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from ..envs import CoopEnv
from ..nets import AgentNetParams, augment_obs, sep_head, trunk_q_com, trunk_step
from ..numcore import RngStream, Tensor, no_grad
from ..rollout import run_episode

PROBE_EPISODES = 32


def build_probe_set(
    env: CoopEnv,
    params: AgentNetParams,
    rng: RngStream,
    episodes: int = PROBE_EPISODES,
    obs_agent_id: bool = False,
) -> np.ndarray:
    """Distinct raw observations from greedy rollouts, in first-seen order."""
    seen = {}
    for _ in range(episodes):
        ep = run_episode(env, params, 0.0, rng, greedy=True, obs_agent_id=obs_agent_id)
        for row in ep.obs.reshape(-1, ep.obs.shape[-1]):
            seen.setdefault(row.tobytes(), row)
    return np.array(list(seen.values()))


def agent_q_vectors(
    params: AgentNetParams,
    probes: np.ndarray,
    obs_agent_id: bool = False,
) -> np.ndarray:
    """Q-vectors (N, P, A) of every agent on every probe, zero hidden state."""
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    n = params.n_agents
    out = np.zeros((n, probes.shape[0], params.n_actions))
    with no_grad():
        view = params.view()
        for i in range(n):
            x = augment_obs(probes, i, n, obs_agent_id)
            h = trunk_step(view, Tensor(x), Tensor(np.zeros((probes.shape[0], params.hidden_dim))))
            q = trunk_q_com(view, h).data
            if params.sep_coef != 0.0:
                q = q + params.sep_coef * sep_head(view, i, h).data
            out[i] = q
    return out


def diag_cosine(
    params: AgentNetParams,
    probes: np.ndarray,
    obs_agent_id: bool = False,
) -> Tuple[np.ndarray, int]:
    """(N x N cosine matrix, number of skipped probes).

    A probe is skipped when any agent's Q-vector on it has zero norm; the
    diagonal is exactly 1.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    if probes.shape[0] < 1:
        raise ValueError("diag_cosine needs at least one probe observation")
    q = agent_q_vectors(params, probes, obs_agent_id)
    norms = np.linalg.norm(q, axis=-1)               # (N, P)
    valid = (norms > 0.0).all(axis=0)                # (P,)
    skipped = int((~valid).sum())
    if not valid.any():
        raise ValueError("diag_cosine: every probe produced a zero-norm Q-vector")
    qv = q[:, valid, :]
    nv = norms[:, valid]
    n = params.n_agents
    matrix = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            cos = np.sum(qv[i] * qv[j], axis=-1) / (nv[i] * nv[j])
            matrix[i, j] = matrix[j, i] = float(cos.mean())
    return matrix, skipped


def off_diagonal_mean(matrix: np.ndarray) -> float:
    n = matrix.shape[0]
    if n < 2:
        return 1.0
    mask = ~np.eye(n, dtype=bool)
    return float(matrix[mask].mean())
