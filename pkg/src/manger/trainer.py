"""The learning loop: TD(lambda) targets through the target networks, global
gradient passes over trunk + heads + mixer, novelty-budgeted masked extra
updates on separate heads + mixer, and RND / target-network maintenance."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from .envs import CoopEnv, make_env
from .nets import (
    AgentNetParams,
    MixerParams,
    RndParams,
    TargetSet,
    Tensor,
    array_view,
    augment_obs,
    init_agent_net,
    init_mixer,
    init_rnd,
    make_target_set,
    mixer_forward_batch,
    sync_targets,
    trunk_forward_seq,
    trunk_q_com,
)
from .novelty import NoveltyReport, extra_updates, rnd_train_step, score_batch
from .numcore import (
    NumericError,
    RngStream,
    STREAM_EVAL,
    STREAM_INIT,
    STREAM_PROBE,
    STREAM_SAMPLER,
    adam_step,
    add,
    backward,
    gather_last,
    matmul,
    mul,
    no_grad,
    reshape,
    stack0,
    sub,
    sum_,
    transpose,
    where_mask,
)
from .rollout import (
    EpisodeBatch,
    EpsSchedule,
    ReplayBuffer,
    collect_interval,
    epsilon_at,
    run_episode,
    sample,
)
from .harness.config import TrainConfig, render_config
from .harness.checkpoint import save_checkpoint
from .harness.diag import build_probe_set, diag_cosine, off_diagonal_mean
from .harness.metrics import MetricsRow, write_metrics


class AlgoFlags(NamedTuple):
    use_sep: bool
    passes: int
    extra_mode: Optional[str]  # None | "rnd" | "fixed"
    use_rnd: bool


ALGO_FLAGS: Dict[str, AlgoFlags] = {
    "qmix": AlgoFlags(False, 1, None, False),
    "qmix_sep": AlgoFlags(True, 1, None, False),
    "qmix_sep_fixed": AlgoFlags(True, 2, "fixed", False),
    "manger": AlgoFlags(True, 2, "rnd", True),
}


@dataclass
class TrainState:
    config: TrainConfig
    flags: AlgoFlags
    agent: AgentNetParams
    mixer: MixerParams
    rnd: RndParams
    targets: TargetSet
    replay: ReplayBuffer
    envs: List[CoopEnv]
    env_streams: List[RngStream]
    sampler: RngStream
    eval_env: CoopEnv
    eval_stream: RngStream
    probe_stream: RngStream
    env_steps: int = 0
    episodes: int = 0
    train_steps: int = 0
    grad_steps: int = 0
    last_sync: int = 0


def init_train_state(config: TrainConfig) -> TrainState:
    flags = ALGO_FLAGS[config.algo]
    env0 = make_env(config.env)
    input_dim = env0.obs_dim + (env0.n_agents if config.obs_agent_id else 0)
    sep_coef = config.sep_lambda if flags.use_sep else 0.0
    init_rng = RngStream(config.seed, STREAM_INIT)
    agent = init_agent_net(env0.n_agents, input_dim, env0.n_actions,
                           config.hidden_dim, sep_coef, init_rng)
    mixer = init_mixer(env0.n_agents, env0.state_dim, config.mixing_embed_dim, init_rng)
    rnd = init_rnd(env0.obs_dim, config.rnd_dim, init_rng)
    envs = [make_env(config.env) for _ in range(config.batch_size_run)]
    env_streams = [RngStream(config.seed, i) for i in range(config.batch_size_run)]
    return TrainState(
        config=config,
        flags=flags,
        agent=agent,
        mixer=mixer,
        rnd=rnd,
        targets=make_target_set(agent, mixer),
        replay=ReplayBuffer(config.buffer_size),
        envs=envs,
        env_streams=env_streams,
        sampler=RngStream(config.seed, STREAM_SAMPLER),
        eval_env=make_env(config.env),
        eval_stream=RngStream(config.seed, STREAM_EVAL),
        probe_stream=RngStream(config.seed, STREAM_PROBE),
    )


# ---------------------------------------------------------------------------
# batched forward machinery
#
# Row layout: timestep-major.  The trunk runs on (B*N) rows per timestep;
# flattened activations use row index t*B*N + b*N + i, so a reshape to
# (T*B, N, ...) groups each (episode, timestep) cell's agents together.


class PreparedBatch(NamedTuple):
    x_seq: np.ndarray        # (T, B*N, input_dim), padded cells zeroed
    obs_rows: np.ndarray     # (valid_cells, obs_dim) raw obs of valid cells
    states_flat: np.ndarray  # (T*B, state_dim), padded cells zeroed
    actions_flat: np.ndarray  # (T*B, N)
    filled_flat: np.ndarray  # (T*B,) bool
    reward: np.ndarray       # (B, T)
    filled: np.ndarray       # (B, T) bool
    n_valid: int


def prepare_batch(batch: EpisodeBatch, obs_agent_id: bool) -> PreparedBatch:
    """Flatten a padded batch into the trainer layout.

    Padded cells are replaced by zeros up front so that no padding value,
    finite or not, can reach a loss or a gradient.
    """
    b, t, n = batch.obs.shape[:3]
    obs = np.where(batch.filled[..., None, None], batch.obs, 0.0)
    state = np.where(batch.filled[..., None], batch.state, 0.0)
    x = augment_obs(obs, np.arange(n)[None, None, :], n, obs_agent_id)
    x_seq = np.ascontiguousarray(x.transpose(1, 0, 2, 3).reshape(t, b * n, -1))
    states_flat = np.ascontiguousarray(state.transpose(1, 0, 2).reshape(t * b, -1))
    actions_flat = np.ascontiguousarray(batch.actions.transpose(1, 0, 2).reshape(t * b, n))
    filled_flat = np.ascontiguousarray(batch.filled.T.reshape(t * b))
    obs_rows = batch.obs[batch.filled].reshape(-1, batch.obs.shape[-1])
    return PreparedBatch(
        x_seq, obs_rows, states_flat, actions_flat, filled_flat,
        batch.reward, batch.filled, int(batch.filled.sum()),
    )


def _forward_trunk(view, x_seq: np.ndarray, hidden_dim: int):
    """Roll the shared trunk over the whole batch sequence."""
    return trunk_forward_seq(view, x_seq, hidden_dim)


def _sep_all(view, gru_flat, n_agents: int, hidden_dim: int):
    """Apply every separate head to its own agent's rows: (T*B, N, A)."""
    tbn = gru_flat.shape[0]
    g3 = reshape(gru_flat, (tbn // n_agents, n_agents, hidden_dim))
    g_by_agent = transpose(g3, (1, 0, 2))
    w = stack0([transpose(view[f"sep{i}_w"], (1, 0)) for i in range(n_agents)])
    b = stack0([reshape(view[f"sep{i}_b"], (1, -1)) for i in range(n_agents)])
    q = add(matmul(g_by_agent, w), b)
    return transpose(q, (1, 0, 2))


def _forward_q_sum(view, x_seq, n_agents, hidden_dim, sep_coef):
    """q_sum (T*B, N, A) for the whole batch, plus the flat GRU activations."""
    gru_flat = _forward_trunk(view, x_seq, hidden_dim)
    q_com = trunk_q_com(view, gru_flat)
    tb = q_com.shape[0] // n_agents
    q_com3 = reshape(q_com, (tb, n_agents, q_com.shape[-1]))
    if sep_coef == 0.0:
        return q_com3, gru_flat
    q_sep3 = _sep_all(view, gru_flat, n_agents, hidden_dim)
    return add(q_com3, mul(q_sep3, sep_coef)), gru_flat


def _td_loss(q_sum, prep: PreparedBatch, mixer_view, n_agents, embed_dim, y_flat):
    q_taken = gather_last(q_sum, prep.actions_flat)
    q_tot = mixer_forward_batch(mixer_view, q_taken, Tensor(prep.states_flat),
                                n_agents, embed_dim)
    err = sub(q_tot, Tensor(y_flat))
    masked = where_mask(mul(err, err), prep.filled_flat)
    return mul(sum_(masked), 1.0 / prep.n_valid)


# ---------------------------------------------------------------------------
# targets


def td_lambda_targets(
    batch: EpisodeBatch,
    targets: TargetSet,
    state: TrainState,
    gamma: float,
    td_lambda: float,
) -> np.ndarray:
    """Backward-recursive TD(lambda) targets per (episode, t).

    The bootstrap value is the target mixer applied to each agent's greedy
    (max) target utility.  At the last filled step the target is the raw
    reward; padded steps are zero.
    """
    prep = prepare_batch(batch, state.config.obs_agent_id)
    cfg = state.config
    with no_grad():
        q_sum, _ = _forward_q_sum(array_view(targets.agent), prep.x_seq,
                                  state.agent.n_agents, cfg.hidden_dim,
                                  state.agent.sep_coef)
        q_max = Tensor(q_sum.data.max(axis=-1))
        q_tot = mixer_forward_batch(array_view(targets.mixer), q_max,
                                    Tensor(prep.states_flat),
                                    state.agent.n_agents, cfg.mixing_embed_dim)
    b, t = prep.reward.shape
    qmax_bt = q_tot.data.reshape(t, b).T
    filled = prep.filled
    y = np.zeros((b, t))
    y[:, t - 1] = np.where(filled[:, t - 1], prep.reward[:, t - 1], 0.0)
    for step in range(t - 2, -1, -1):
        cont = (1.0 - td_lambda) * qmax_bt[:, step + 1] + td_lambda * y[:, step + 1]
        boot = np.where(filled[:, step + 1], cont, 0.0)
        y[:, step] = np.where(filled[:, step], prep.reward[:, step] + gamma * boot, 0.0)
    return y


def _flatten_targets(y: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(y.T.reshape(-1))


# ---------------------------------------------------------------------------
# update phases


def global_update(
    batch: EpisodeBatch,
    state: TrainState,
    y: np.ndarray,
    lr: float,
    passes: int = 2,
) -> float:
    """Full gradient passes on the masked TD loss (trunk + all heads + mixer).

    Targets y are computed once by the caller and stay fixed across passes.
    Returns the first pass's loss.
    """
    prep = prepare_batch(batch, state.config.obs_agent_id)
    y_flat = _flatten_targets(y)
    first_loss = float("nan")
    for p in range(passes):
        q_sum, _ = _forward_q_sum(state.agent.view(), prep.x_seq,
                                  state.agent.n_agents, state.config.hidden_dim,
                                  state.agent.sep_coef)
        loss = _td_loss(q_sum, prep, state.mixer.view(),
                        state.agent.n_agents, state.config.mixing_embed_dim, y_flat)
        if p == 0:
            first_loss = loss.item()
        try:
            backward(loss)
        except NumericError as exc:
            raise NumericError(
                f"{exc}; batch stats: reward mean {prep.reward.mean():.4g}, "
                f"y range [{y.min():.4g}, {y.max():.4g}], valid cells {prep.n_valid}"
            ) from exc
        adam_step(state.agent.store, lr)
        adam_step(state.mixer.store, lr)
        state.grad_steps += 1
    return first_loss


def extra_update_phase(
    batch: EpisodeBatch,
    state: TrainState,
    report: NoveltyReport,
    y: np.ndarray,
    lr: float,
    iteration_hook: Optional[Callable[[int, np.ndarray], None]] = None,
) -> int:
    """Masked extra updates: while any budget is positive, apply gradients to
    the separate heads of agents whose budget is still positive, plus the
    mixer.  The shared trunk contributes to the forward pass but is frozen,
    so its activations are computed once and reused across iterations.

    Returns the number of iterations executed (max over agent budgets).
    """
    budget = report.extra.astype(np.int64).copy()
    if not (budget > 0).any():
        return 0
    prep = prepare_batch(batch, state.config.obs_agent_id)
    y_flat = _flatten_targets(y)
    cfg = state.config
    n = state.agent.n_agents
    with no_grad():
        gru_frozen = _forward_trunk(state.agent.view(), prep.x_seq, cfg.hidden_dim)
        q_com = trunk_q_com(state.agent.view(), gru_frozen)
    q_com3 = q_com.data.reshape(-1, n, state.agent.n_actions)
    gru_const = gru_frozen.data
    iterations = 0
    while (budget > 0).any():
        active = budget > 0
        q_sep3 = _sep_all(state.agent.view(), Tensor(gru_const), n, cfg.hidden_dim)
        q_sum = add(Tensor(q_com3), mul(q_sep3, state.agent.sep_coef))
        loss = _td_loss(q_sum, prep, state.mixer.view(), n, cfg.mixing_embed_dim, y_flat)
        try:
            backward(loss)
        except NumericError as exc:
            raise NumericError(
                f"{exc}; extra phase iteration {iterations}, budgets {budget.tolist()}"
            ) from exc
        head_names = [name for i in np.flatnonzero(active) for name in state.agent.sep_names(int(i))]
        adam_step(state.agent.store, lr, names=head_names)
        adam_step(state.mixer.store, lr)
        state.agent.store.zero_grads()  # discard gradients of masked heads
        state.grad_steps += 1
        if iteration_hook is not None:
            iteration_hook(iterations, active.copy())
        budget -= 1
        iterations += 1
    return iterations


# ---------------------------------------------------------------------------
# evaluation


def evaluate(
    policy,
    env: CoopEnv,
    episodes: int,
    rng: RngStream,
    obs_agent_id: bool = False,
) -> tuple[float, float]:
    """Greedy evaluation: (mean return, success rate).

    ``policy`` is either AgentNetParams (greedy net policy) or a callable
    ``(obs, state, t) -> joint action`` for scripted/oracle policies.
    Success is a strictly positive episode return.
    """
    if episodes < 1:
        raise ValueError("evaluate needs at least one episode")
    returns = []
    for _ in range(episodes):
        if isinstance(policy, AgentNetParams):
            ep = run_episode(env, policy, 0.0, rng, greedy=True, obs_agent_id=obs_agent_id)
            returns.append(ep.total_reward)
        else:
            returns.append(_run_scripted(env, policy, rng))
    returns = np.asarray(returns)
    return float(returns.mean()), float((returns > 0).mean())


def _run_scripted(env: CoopEnv, policy: Callable, rng: RngStream) -> float:
    obs, env_state = env.reset(seed=rng.integers(2**31))
    total = 0.0
    for t in range(env.max_steps):
        obs, env_state, reward, done, _ = env.step(policy(obs, env_state, t))
        total += reward
        if done:
            break
    return total


# ---------------------------------------------------------------------------
# checkpoint payload


def checkpoint_payload(state: TrainState) -> Dict[str, np.ndarray]:
    payload: Dict[str, np.ndarray] = {}
    for name, entry in state.agent.store.entries():
        payload[f"agent/{name}"] = entry.value.data
    for name, entry in state.mixer.store.entries():
        payload[f"mixer/{name}"] = entry.value.data
    for name, entry in state.rnd.predictor.entries():
        payload[f"rnd/predictor/{name}"] = entry.value.data
    for name, arr in state.rnd.target.items():
        payload[f"rnd/target/{name}"] = arr
    payload["meta/sep_lambda"] = np.array([state.agent.sep_coef])
    payload["meta/obs_agent_id"] = np.array([1.0 if state.config.obs_agent_id else 0.0])
    return payload


def nets_from_payload(payload: Dict[str, np.ndarray]) -> tuple[AgentNetParams, MixerParams, RndParams, bool]:
    """Rebuild the three networks from a checkpoint payload.

    The architecture is inferred from tensor shapes; scalar metadata supplies
    the separate-head coefficient and the agent-id flag.
    """
    hidden_dim, input_dim = payload["agent/fc1_w"].shape
    n_actions = payload["agent/fc2_w"].shape[0]
    n_agents = len([k for k in payload if k.startswith("agent/sep") and k.endswith("_w")])
    sep_coef = float(payload["meta/sep_lambda"][0])
    obs_agent_id = bool(payload["meta/obs_agent_id"][0] > 0.5)
    embed_dim, state_dim = payload["mixer/hb1_w"].shape
    rnd_dim, rnd_obs_dim = payload["rnd/predictor/l2_w"].shape[0], payload["rnd/predictor/l1_w"].shape[1]

    zero = RngStream(0, STREAM_INIT)
    agent = init_agent_net(n_agents, input_dim, n_actions, hidden_dim, sep_coef, zero)
    mixer = init_mixer(n_agents, state_dim, embed_dim, zero)
    rnd = init_rnd(rnd_obs_dim, rnd_dim, zero)
    agent.store.load({k.split("/", 1)[1]: v for k, v in payload.items() if k.startswith("agent/")})
    mixer.store.load({k.split("/", 1)[1]: v for k, v in payload.items() if k.startswith("mixer/")})
    rnd.predictor.load({k.split("/", 2)[2]: v for k, v in payload.items() if k.startswith("rnd/predictor/")})
    rnd.target = {k.split("/", 2)[2]: v.copy() for k, v in payload.items() if k.startswith("rnd/target/")}
    return agent, mixer, rnd, obs_agent_id


# ---------------------------------------------------------------------------
# the full loop


@dataclass
class TrainResult:
    rows: List[MetricsRow]
    metrics_path: Path
    checkpoint_path: Path
    config_path: Path
    state: TrainState = field(repr=False, default=None)

    @property
    def final_eval_return(self) -> Optional[float]:
        for row in reversed(self.rows):
            if row.eval_return is not None:
                return row.eval_return
        return None

    @property
    def final_eval_success(self) -> Optional[float]:
        for row in reversed(self.rows):
            if row.eval_success is not None:
                return row.eval_success
        return None


def train(config: TrainConfig) -> TrainResult:
    """Run the full loop and write metrics, config echo, and checkpoint."""
    state = init_train_state(config)
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    config_path = outdir / "config.cfg"
    _atomic_write(config_path, render_config(config))

    schedule = EpsSchedule(config.epsilon_start, config.epsilon_finish, config.anneal_steps)
    rows: List[MetricsRow] = []
    t_mark = time.perf_counter()

    while state.env_steps < config.total_steps:
        eps = epsilon_at(state.env_steps, schedule)
        episodes = collect_interval(state.envs, state.agent, eps, state.env_streams,
                                    obs_agent_id=config.obs_agent_id)
        for ep in episodes:
            state.replay.add(ep)
            state.env_steps += ep.length
        state.episodes += len(episodes)
        mean_train_return = float(np.mean([ep.total_reward for ep in episodes]))

        batch = sample(state.replay, config.batch_size, state.sampler)
        if batch is None:
            t_mark = time.perf_counter()  # warmup collection is not charged to a step
            continue

        state.train_steps += 1
        y = td_lambda_targets(batch, state.targets, state, config.gamma, config.td_lambda)

        report = None
        mean_novelty = None
        if state.flags.extra_mode == "rnd":
            per_obs = score_batch(batch, state.rnd)
            report = extra_updates(per_obs, batch.filled, config.alpha, config.beta)
            mean_novelty = report.agent_mean
        elif state.flags.extra_mode == "fixed":
            report = NoveltyReport(
                per_obs=np.zeros_like(batch.reward[..., None]),
                agent_mean=np.zeros(state.agent.n_agents),
                pooled_mean=0.0,
                pooled_std=0.0,
                extra=np.full(state.agent.n_agents, config.fixed_extra, dtype=np.int64),
            )

        loss = global_update(batch, state, y, config.lr, passes=state.flags.passes)
        if report is not None:
            extra_update_phase(batch, state, report, y, config.lr)

        rnd_loss = None
        if state.flags.use_rnd and state.train_steps % config.m_rnd == 0:
            prep_obs = batch.obs[batch.filled].reshape(-1, batch.obs.shape[-1])
            rnd_loss = rnd_train_step(state.rnd, prep_obs, config.lr_rnd)

        if state.grad_steps - state.last_sync >= config.m_target:
            sync_targets(state.agent, state.mixer, state.targets, mode="hard")
            state.last_sync = state.grad_steps

        eval_return = eval_success = q_cosine = None
        if state.train_steps % config.eval_every == 0:
            eval_return, eval_success = evaluate(
                state.agent, state.eval_env, config.eval_episodes,
                state.eval_stream, obs_agent_id=config.obs_agent_id)
            probes = build_probe_set(state.eval_env, state.agent, state.probe_stream,
                                     obs_agent_id=config.obs_agent_id)
            matrix, _ = diag_cosine(state.agent, probes, obs_agent_id=config.obs_agent_id)
            q_cosine = off_diagonal_mean(matrix)

        now = time.perf_counter()
        rows.append(MetricsRow(
            train_step=state.train_steps,
            env_steps=state.env_steps,
            episodes=state.episodes,
            epsilon=eps,
            loss=loss,
            rnd_loss=rnd_loss,
            mean_train_return=mean_train_return,
            eval_return=eval_return,
            eval_success=eval_success,
            mean_novelty=mean_novelty,
            mean_extra_updates=float(report.extra.mean()) if report is not None else None,
            q_cosine_mean=q_cosine,
            wall_ms_per_step=(now - t_mark) * 1000.0,
        ))
        t_mark = now

    metrics_path = outdir / "metrics.csv"
    write_metrics(rows, metrics_path)
    checkpoint_path = outdir / "checkpoint.mngr"
    save_checkpoint(checkpoint_payload(state), checkpoint_path)
    return TrainResult(rows, metrics_path, checkpoint_path, config_path, state)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
