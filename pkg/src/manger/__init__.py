"""Novelty-guided sample reuse for cooperative multi-agent Q-learning.

A desk-scale laboratory: QMIX-style value decomposition with a shared
recurrent trunk and per-agent separate heads, RND novelty scoring that
budgets masked extra updates per agent, and three small cooperative
environments with exact oracles.
"""

from . import envs, nets, novelty, numcore, rollout, trainer
from .envs import make_env, oracle_optimal, resimulate
from .harness.config import TrainConfig, parse_config
from .nets import (
    AgentNetParams,
    MixerParams,
    RndParams,
    TargetSet,
    agent_forward,
    mixer_forward,
    rnd_novelty,
    select_action,
    sync_targets,
)
from .novelty import NoveltyReport, extra_updates, h_mask, rnd_train_step, score_batch
from .numcore import ParamStore, RngStream, Tensor, no_grad
from .rollout import Episode, EpisodeBatch, EpsSchedule, ReplayBuffer, epsilon_at
from .trainer import TrainResult, evaluate, train

__all__ = [
    "AgentNetParams",
    "Episode",
    "EpisodeBatch",
    "EpsSchedule",
    "MixerParams",
    "NoveltyReport",
    "ParamStore",
    "ReplayBuffer",
    "RndParams",
    "RngStream",
    "TargetSet",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "agent_forward",
    "envs",
    "epsilon_at",
    "evaluate",
    "extra_updates",
    "h_mask",
    "make_env",
    "mixer_forward",
    "nets",
    "no_grad",
    "novelty",
    "numcore",
    "oracle_optimal",
    "parse_config",
    "resimulate",
    "rnd_novelty",
    "rnd_train_step",
    "rollout",
    "score_batch",
    "select_action",
    "sync_targets",
    "train",
    "trainer",
]
