"""The three networks: recurrent per-agent Q-network with a shared trunk and
per-agent separate heads, the monotonic state-conditioned mixer, and the
random-distillation target/predictor pair.

All forward functions operate on a "view": a mapping from parameter name to
Tensor.  Live networks pass their ParamStore view (gradients flow); frozen
copies pass plain-array views (no gradients).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from .numcore import (
    DimensionError,
    GruParams,
    ParamStore,
    RngStream,
    Tensor,
    abs_,
    add,
    affine,
    elu,
    gru_cell,
    init_uniform_fanin,
    mul,
    no_grad,
    relu,
    reshape,
    sum_axis,
)

# hidden width of the two-layer mixer hypernetworks and of the RND MLPs;
# the defaults data does not pin these, so they are fixed artifact constants
HYPERNET_HIDDEN = 64
RND_HIDDEN = 64

View = Mapping[str, Tensor]


def store_view(store: ParamStore) -> Dict[str, Tensor]:
    return {name: entry.value for name, entry in store.entries()}


def array_view(arrays: Mapping[str, np.ndarray]) -> Dict[str, Tensor]:
    return {name: Tensor(arr) for name, arr in arrays.items()}


# ---------------------------------------------------------------------------
# agent network


@dataclass
class AgentNetParams:
    """Shared trunk (fc1 -> GRU -> fc2) plus one linear head per agent.

    ``sep_coef`` scales the separate-head contribution in q_sum; zero turns
    the network into a fully shared one.
    """

    store: ParamStore
    n_agents: int
    input_dim: int
    n_actions: int
    hidden_dim: int
    sep_coef: float

    def view(self) -> Dict[str, Tensor]:
        return store_view(self.store)

    def trunk_names(self) -> list[str]:
        return [n for n in self.store.names() if not n.startswith("sep")]

    def sep_names(self, agent_idx: int) -> list[str]:
        return [f"sep{agent_idx}_w", f"sep{agent_idx}_b"]


def init_agent_net(
    n_agents: int,
    input_dim: int,
    n_actions: int,
    hidden_dim: int,
    sep_coef: float,
    rng: RngStream,
) -> AgentNetParams:
    store = ParamStore()
    store.add("fc1_w", init_uniform_fanin((hidden_dim, input_dim), rng))
    store.add("fc1_b", init_uniform_fanin((hidden_dim,), rng))
    for gate in ("r", "z", "n"):
        store.add(f"gru_w{gate}", init_uniform_fanin((hidden_dim, hidden_dim), rng))
        store.add(f"gru_u{gate}", init_uniform_fanin((hidden_dim, hidden_dim), rng))
        store.add(f"gru_b{gate}", init_uniform_fanin((hidden_dim,), rng))
    store.add("fc2_w", init_uniform_fanin((n_actions, hidden_dim), rng))
    store.add("fc2_b", init_uniform_fanin((n_actions,), rng))
    for i in range(n_agents):
        store.add(f"sep{i}_w", init_uniform_fanin((n_actions, hidden_dim), rng))
        store.add(f"sep{i}_b", init_uniform_fanin((n_actions,), rng))
    return AgentNetParams(store, n_agents, input_dim, n_actions, hidden_dim, sep_coef)


def gru_view(view: View) -> GruParams:
    return GruParams(
        view["gru_wr"], view["gru_ur"], view["gru_br"],
        view["gru_wz"], view["gru_uz"], view["gru_bz"],
        view["gru_wn"], view["gru_un"], view["gru_bn"],
    )


def trunk_step(view: View, x: Tensor, h_prev: Tensor) -> Tensor:
    """Advance the shared trunk one timestep: relu(fc1(x)) through the GRU."""
    z = relu(affine(x, view["fc1_w"], view["fc1_b"]))
    return gru_cell(z, h_prev, gru_view(view))


def trunk_forward_seq(view: View, x_seq: np.ndarray, hidden_dim: int) -> Tensor:
    """Roll the trunk over a whole (T, rows, input) sequence.

    Computes the same recurrence as repeated trunk_step, but hoists fc1 and
    the input-side GRU projections out of the time loop into single matmuls
    and runs the recurrence itself as one fused BPTT node.  Returns the
    stacked GRU outputs flattened to (T*rows, hidden).
    """
    from .numcore import gru_sequence, linear

    t_max, rows, in_dim = x_seq.shape
    x_flat = relu(affine(Tensor(x_seq.reshape(t_max * rows, in_dim)),
                         view["fc1_w"], view["fc1_b"]))
    shape3 = (t_max, rows, hidden_dim)
    xr = reshape(affine(x_flat, view["gru_wr"], view["gru_br"]), shape3)
    xz = reshape(affine(x_flat, view["gru_wz"], view["gru_bz"]), shape3)
    xn = reshape(linear(x_flat, view["gru_wn"]), shape3)
    h_all = gru_sequence(xr, xz, xn,
                         view["gru_ur"], view["gru_uz"], view["gru_un"], view["gru_bn"])
    return reshape(h_all, (t_max * rows, hidden_dim))


def trunk_q_com(view: View, gru_out: Tensor) -> Tensor:
    return affine(gru_out, view["fc2_w"], view["fc2_b"])


def sep_head(view: View, agent_idx: int, gru_out: Tensor) -> Tensor:
    return affine(gru_out, view[f"sep{agent_idx}_w"], view[f"sep{agent_idx}_b"])


def augment_obs(obs: np.ndarray, agent_idx, n_agents: int, enabled: bool) -> np.ndarray:
    """Optionally append a one-hot agent id to raw observations.

    ``agent_idx`` is a scalar or an array broadcastable to obs.shape[:-1].
    """
    obs = np.asarray(obs, dtype=np.float64)
    if not enabled:
        return obs
    idx = np.broadcast_to(np.asarray(agent_idx, dtype=np.int64), obs.shape[:-1])
    one_hot = np.eye(n_agents)[idx.reshape(-1)].reshape(obs.shape[:-1] + (n_agents,))
    return np.concatenate([obs, one_hot], axis=-1)


def agent_forward(
    obs: np.ndarray,
    h_prev: np.ndarray,
    agent_idx: int,
    params: AgentNetParams,
) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    """Single-observation forward pass for one agent.

    Returns (q_sum, q_com, q_sep, h_next).  q_sum = q_com + sep_coef * q_sep.
    """
    if not 0 <= agent_idx < params.n_agents:
        raise IndexError(f"agent index {agent_idx} out of range for {params.n_agents} agents")
    view = params.view()
    h_next = trunk_step(view, Tensor(obs), Tensor(h_prev))
    q_com = trunk_q_com(view, h_next)
    q_sep = sep_head(view, agent_idx, h_next)
    q_sum = add(q_com, mul(q_sep, params.sep_coef))
    return q_sum, q_com, q_sep, h_next


# ---------------------------------------------------------------------------
# monotonic mixer


@dataclass
class MixerParams:
    """State-conditioned monotonic mixer.

    Hypernetworks produce the mixing weights from the global state; their
    absolute values enforce monotonicity of q_tot in every agent utility.
    """

    store: ParamStore
    n_agents: int
    state_dim: int
    embed_dim: int

    def view(self) -> Dict[str, Tensor]:
        return store_view(self.store)


def init_mixer(n_agents: int, state_dim: int, embed_dim: int, rng: RngStream) -> MixerParams:
    if embed_dim <= 0:
        raise ValueError("embed_dim must be positive")
    store = ParamStore()
    store.add("hw1_l1_w", init_uniform_fanin((HYPERNET_HIDDEN, state_dim), rng))
    store.add("hw1_l1_b", init_uniform_fanin((HYPERNET_HIDDEN,), rng))
    store.add("hw1_l2_w", init_uniform_fanin((n_agents * embed_dim, HYPERNET_HIDDEN), rng))
    store.add("hw1_l2_b", init_uniform_fanin((n_agents * embed_dim,), rng))
    store.add("hwf_l1_w", init_uniform_fanin((HYPERNET_HIDDEN, state_dim), rng))
    store.add("hwf_l1_b", init_uniform_fanin((HYPERNET_HIDDEN,), rng))
    store.add("hwf_l2_w", init_uniform_fanin((embed_dim, HYPERNET_HIDDEN), rng))
    store.add("hwf_l2_b", init_uniform_fanin((embed_dim,), rng))
    store.add("hb1_w", init_uniform_fanin((embed_dim, state_dim), rng))
    store.add("hb1_b", init_uniform_fanin((embed_dim,), rng))
    store.add("v1_w", init_uniform_fanin((embed_dim, state_dim), rng))
    store.add("v1_b", init_uniform_fanin((embed_dim,), rng))
    store.add("v2_w", init_uniform_fanin((1, embed_dim), rng))
    store.add("v2_b", init_uniform_fanin((1,), rng))
    return MixerParams(store, n_agents, state_dim, embed_dim)


def mixer_forward_batch(
    view: View,
    q_agents: Tensor,
    states: Tensor,
    n_agents: int,
    embed_dim: int,
) -> Tensor:
    """Mix per-agent utilities (R, N) with states (R, S) into q_tot (R,).

    The per-row mixing products are expressed as broadcast multiplies plus
    axis sums rather than batched matmuls; with tiny inner dimensions that
    is far cheaper than looping one GEMM per row.
    """
    if q_agents.shape[-1] != n_agents:
        raise DimensionError(f"mixer: q_agents {q_agents.shape} vs {n_agents} agents")
    rows = q_agents.shape[0]
    w1 = abs_(affine(relu(affine(states, view["hw1_l1_w"], view["hw1_l1_b"])),
                     view["hw1_l2_w"], view["hw1_l2_b"]))
    w1 = reshape(w1, (rows, n_agents, embed_dim))
    b1 = affine(states, view["hb1_w"], view["hb1_b"])
    mixed = sum_axis(mul(reshape(q_agents, (rows, n_agents, 1)), w1), 1)
    hidden = elu(add(mixed, b1))
    w_final = abs_(affine(relu(affine(states, view["hwf_l1_w"], view["hwf_l1_b"])),
                          view["hwf_l2_w"], view["hwf_l2_b"]))
    v = affine(relu(affine(states, view["v1_w"], view["v1_b"])), view["v2_w"], view["v2_b"])
    out = add(sum_axis(mul(hidden, w_final), 1), reshape(v, (rows,)))
    return out


def mixer_forward(q_agents, state, params: MixerParams) -> Tensor:
    """Scalar q_tot for a single (q_agents, state) pair.

    Accepts a live Tensor for q_agents so gradients can flow through the
    per-agent utilities.
    """
    q = q_agents if isinstance(q_agents, Tensor) else Tensor(np.asarray(q_agents, dtype=np.float64))
    s = Tensor(np.asarray(state, dtype=np.float64).reshape(1, -1))
    if s.shape[-1] != params.state_dim:
        raise DimensionError(f"mixer: state {s.shape} vs state_dim {params.state_dim}")
    out = mixer_forward_batch(params.view(), reshape(q, (1, -1)), s,
                              params.n_agents, params.embed_dim)
    return reshape(out, ())


# ---------------------------------------------------------------------------
# random network distillation pair


@dataclass
class RndParams:
    """Frozen random target network and a trainable predictor of the same shape."""

    predictor: ParamStore
    target: Dict[str, np.ndarray]
    obs_dim: int
    embed_dim: int

    def predictor_view(self) -> Dict[str, Tensor]:
        return store_view(self.predictor)


def init_rnd(obs_dim: int, embed_dim: int, rng: RngStream) -> RndParams:
    target = {
        "l1_w": init_uniform_fanin((RND_HIDDEN, obs_dim), rng).data,
        "l1_b": init_uniform_fanin((RND_HIDDEN,), rng).data,
        "l2_w": init_uniform_fanin((embed_dim, RND_HIDDEN), rng).data,
        "l2_b": init_uniform_fanin((embed_dim,), rng).data,
    }
    predictor = ParamStore()
    predictor.add("l1_w", init_uniform_fanin((RND_HIDDEN, obs_dim), rng))
    predictor.add("l1_b", init_uniform_fanin((RND_HIDDEN,), rng))
    predictor.add("l2_w", init_uniform_fanin((embed_dim, RND_HIDDEN), rng))
    predictor.add("l2_b", init_uniform_fanin((embed_dim,), rng))
    return RndParams(predictor, target, obs_dim, embed_dim)


def rnd_embed(view: View, x: Tensor) -> Tensor:
    return affine(relu(affine(x, view["l1_w"], view["l1_b"])), view["l2_w"], view["l2_b"])


def _rnd_embed_arrays(w: Mapping[str, np.ndarray], x: np.ndarray) -> np.ndarray:
    hidden = np.maximum(x @ w["l1_w"].T + w["l1_b"], 0.0)
    return hidden @ w["l2_w"].T + w["l2_b"]


def rnd_novelty_rows(obs_rows: np.ndarray, params: RndParams) -> np.ndarray:
    """Squared target-predictor embedding distance per row (no gradients)."""
    obs_rows = np.asarray(obs_rows, dtype=np.float64)
    pred_w = {name: entry.value.data for name, entry in params.predictor.entries()}
    diff = _rnd_embed_arrays(params.target, obs_rows) - _rnd_embed_arrays(pred_w, obs_rows)
    return np.sum(diff * diff, axis=-1)


def rnd_novelty(obs, params: RndParams) -> float:
    return float(rnd_novelty_rows(np.asarray(obs, dtype=np.float64).reshape(1, -1), params)[0])


# ---------------------------------------------------------------------------
# target copies


@dataclass
class TargetSet:
    """Frozen copies of the agent network and mixer parameters."""

    agent: Dict[str, np.ndarray]
    mixer: Dict[str, np.ndarray]


def make_target_set(agent: AgentNetParams, mixer: MixerParams) -> TargetSet:
    return TargetSet(agent.store.snapshot(), mixer.store.snapshot())


def sync_targets(
    agent: AgentNetParams,
    mixer: MixerParams,
    targets: TargetSet,
    mode: str = "hard",
    tau: float = 1.0,
) -> None:
    """hard: bitwise copy of the live networks; soft: convex blend with tau."""
    if mode not in ("hard", "soft"):
        raise ValueError(f"unknown sync mode: {mode}")
    for store, frozen in ((agent.store, targets.agent), (mixer.store, targets.mixer)):
        for name, entry in store.entries():
            if mode == "hard":
                frozen[name] = entry.value.data.copy()
            else:
                frozen[name] = tau * entry.value.data + (1.0 - tau) * frozen[name]


# ---------------------------------------------------------------------------
# action selection


def select_action(q_values: np.ndarray, avail: np.ndarray, eps: float, rng: RngStream) -> int:
    """Epsilon-greedy over available actions; greedy ties break to the lowest index.

    With eps == 0 no random draws are consumed, so greedy selection is a pure
    function of the Q-vector.
    """
    avail = np.asarray(avail, dtype=bool)
    if not avail.any():
        raise ValueError("environment contract violation: no available action")
    if eps > 0.0 and rng.random() < eps:
        choices = np.flatnonzero(avail)
        return int(choices[rng.integers(len(choices))])
    q = np.where(avail, np.asarray(q_values, dtype=np.float64), -np.inf)
    return int(np.argmax(q))
