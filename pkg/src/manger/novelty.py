"""Novelty scoring and extra-update budgeting.

A single shared distillation pair scores every observation regardless of
which agent produced it; per-agent mean novelty is compared against pooled
batch statistics to grant each agent a small integer budget of additional
masked updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import RndParams, rnd_embed, rnd_novelty_rows
from .numcore import Tensor, adam_step, backward, mul, sub, sum_
from .rollout import EpisodeBatch

# below this pooled standard deviation the batch is treated as novelty-flat
# and no extra updates are granted
SIGMA_FLOOR = 1e-8


@dataclass
class NoveltyReport:
    """Per-agent novelty summary and the extra-update budget vector."""

    per_obs: np.ndarray      # (B, T, N), zero on padded cells
    agent_mean: np.ndarray   # (N,)
    pooled_mean: float
    pooled_std: float
    extra: np.ndarray        # (N,) non-negative ints, clamped to the cap


def score_batch(batch: EpisodeBatch, rnd: RndParams) -> np.ndarray:
    """Novelty of every valid (episode, t, agent) cell; padded cells are 0."""
    b, t, n = batch.obs.shape[:3]
    rows = batch.obs.reshape(b * t * n, -1)
    scores = rnd_novelty_rows(rows, rnd).reshape(b, t, n)
    return np.where(batch.filled[..., None], scores, 0.0)


def budget_from_stats(agent_mean: float, pooled_mean: float, pooled_std: float,
                      alpha: float, beta: int) -> int:
    """int(alpha * (N_i - mean) / std), floored, clamped to [0, beta]."""
    if pooled_std < SIGMA_FLOOR:
        return 0
    raw = alpha * (agent_mean - pooled_mean) / pooled_std
    return int(min(max(math.floor(raw), 0), beta))


def extra_updates(per_obs: np.ndarray, filled: np.ndarray, alpha: float, beta: int) -> NoveltyReport:
    """Per-agent extra-update budgets from a scored batch.

    The pooled mean/std are taken over all valid cells across agents; the
    per-agent score is the mean over that agent's valid cells.
    """
    filled = np.asarray(filled, dtype=bool)
    if not filled.any():
        raise ValueError("extra_updates: batch has no valid cells")
    n = per_obs.shape[2]
    valid = per_obs[filled]                      # (cells, N)
    pooled = valid.reshape(-1)
    pooled_mean = float(pooled.mean())
    pooled_std = float(pooled.std())
    agent_mean = valid.mean(axis=0)
    extra = np.array(
        [budget_from_stats(float(agent_mean[i]), pooled_mean, pooled_std, alpha, beta) for i in range(n)],
        dtype=np.int64,
    )
    return NoveltyReport(per_obs, agent_mean, pooled_mean, pooled_std, extra)


def h_mask(t_vec: np.ndarray) -> np.ndarray:
    """Elementwise indicator of positivity: 1 where t > 0, else 0."""
    return (np.asarray(t_vec) > 0).astype(np.int64)


def rnd_train_step(rnd: RndParams, obs_rows: np.ndarray, lr: float) -> float:
    """One Adam step of the predictor towards the frozen target.

    The loss is the mean over rows of the squared embedding distance; the
    pre-step loss is returned.
    """
    obs_rows = np.asarray(obs_rows, dtype=np.float64)
    if obs_rows.ndim != 2 or obs_rows.shape[0] == 0:
        raise ValueError("rnd_train_step expects a non-empty (rows, obs_dim) array")
    target = Tensor(_target_embed(rnd, obs_rows))
    pred = rnd_embed(rnd.predictor_view(), Tensor(obs_rows))
    diff = sub(pred, target)
    loss = mul(sum_(mul(diff, diff)), 1.0 / obs_rows.shape[0])
    value = loss.item()
    backward(loss)
    adam_step(rnd.predictor, lr)
    return value


def _target_embed(rnd: RndParams, rows: np.ndarray) -> np.ndarray:
    hidden = np.maximum(rows @ rnd.target["l1_w"].T + rnd.target["l1_b"], 0.0)
    return hidden @ rnd.target["l2_w"].T + rnd.target["l2_b"]
