"""Acceptance criteria, one test per criterion.

The directional criteria share three training batteries (session fixtures):
symmetry breaking, the role-specialization grid, and the twin chains.  Each
test prints one labelled pass/fail line with the measured quantities; run
with ``pytest tests/test_acceptance.py -v -s`` to see them.
"""

import math
import time

import numpy as np
import pytest

from conftest import finite_diff_grads
from manger.envs import NoveltyChain, SymmetryBreak, make_env, oracle_optimal, resimulate
from manger.harness.config import TrainConfig
from manger.harness.metrics import read_metrics
from manger.novelty import NoveltyReport, extra_updates
from manger.numcore import ParamStore, RngStream, Tensor, adam_step, backward, no_grad
from manger.rollout import Episode, collect_interval, pack_episodes, sample
from manger.trainer import (
    TrainResult,
    _flatten_targets,
    _forward_q_sum,
    _td_loss,
    extra_update_phase,
    global_update,
    init_train_state,
    prepare_batch,
    td_lambda_targets,
    train,
)

pytestmark = pytest.mark.acceptance

SEEDS = (0, 1, 2, 3, 4)


def _report(name, passed, detail):
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return passed


def _final(rows, field):
    for row in reversed(rows):
        value = getattr(row, field)
        if value is not None:
            return value
    return None


# ---------------------------------------------------------------------------
# shared training batteries


def symmetry_config(algo, seed, outdir):
    return TrainConfig(
        env="symmetry_break", algo=algo, seed=seed, hidden_dim=32,
        mixing_embed_dim=16, rnd_dim=16, batch_size=64, batch_size_run=8,
        buffer_size=500, total_steps=5000, anneal_steps=1500, eval_every=25,
        eval_episodes=8, sep_lambda=0.5, lr=1e-3, td_lambda=0.0,
        outdir=str(outdir),
    )


def role_config(algo, seed, outdir, obs_agent_id=False):
    return TrainConfig(
        env="role_grid", algo=algo, seed=seed, obs_agent_id=obs_agent_id,
        hidden_dim=32, mixing_embed_dim=32, rnd_dim=32, batch_size=16,
        batch_size_run=8, buffer_size=2000, total_steps=50_000,
        anneal_steps=25_000, eval_every=25, eval_episodes=4, alpha=2.0,
        beta=3, sep_lambda=0.5, lr=1e-3, td_lambda=0.6, outdir=str(outdir),
    )


def chain_config(algo, seed, outdir):
    return TrainConfig(
        env="novelty_chain", algo=algo, seed=seed, hidden_dim=32,
        mixing_embed_dim=16, rnd_dim=16, batch_size=16, batch_size_run=8,
        buffer_size=2000, total_steps=100_000, anneal_steps=60_000,
        eval_every=25, eval_episodes=4, alpha=6.0, beta=3, sep_lambda=0.5,
        lr=1e-3, td_lambda=0.8, outdir=str(outdir),
    )


@pytest.fixture(scope="session")
def symmetry_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("symmetry")
    runs = {}
    for algo in ("manger", "qmix"):
        for seed in SEEDS:
            start = time.perf_counter()
            result = train(symmetry_config(algo, seed, root / f"{algo}_{seed}"))
            runs[(algo, seed)] = (result, time.perf_counter() - start)
    return runs


@pytest.fixture(scope="session")
def role_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("role")
    runs = {}
    for seed in SEEDS:
        runs[("manger", seed)] = train(role_config("manger", seed, root / f"m_{seed}"))
        runs[("qmix_id", seed)] = train(
            role_config("qmix", seed, root / f"qid_{seed}", obs_agent_id=True))
    runs[("qmix_plain", 0)] = train(role_config("qmix", 0, root / "qplain_0"))
    return runs


@pytest.fixture(scope="session")
def chain_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("chain")
    runs = {}
    for algo in ("manger", "qmix_sep_fixed", "qmix"):
        for seed in SEEDS:
            runs[(algo, seed)] = train(chain_config(algo, seed, root / f"{algo}_{seed}"))
    return runs


# ---------------------------------------------------------------------------
# criterion 1: gradient soundness


def test_criterion_01_gradient_soundness():
    start = time.perf_counter()
    rng = RngStream(0, 17)
    from manger.nets import init_agent_net, init_mixer

    n_agents, obs_dim, hidden, n_actions = 2, 4, 6, 3
    state_dim, embed = 5, 4
    agent = init_agent_net(n_agents, obs_dim, n_actions, hidden, 0.5, rng)
    mixer = init_mixer(n_agents, state_dim, embed, rng)

    data_rng = np.random.default_rng(1)
    episodes = []
    for length in (4, 3, 2):
        episodes.append(Episode(
            obs=data_rng.uniform(-1, 1, (length, n_agents, obs_dim)),
            state=data_rng.uniform(-1, 1, (length, state_dim)),
            actions=data_rng.integers(0, n_actions, (length, n_agents)),
            reward=data_rng.uniform(-1, 1, length),
            terminated=True,
        ))
    prep = prepare_batch(pack_episodes(episodes), obs_agent_id=False)
    y_flat = _flatten_targets(data_rng.uniform(-1, 1, (3, 4)))

    def loss_fn():
        q_sum, _ = _forward_q_sum(agent.view(), prep.x_seq, n_agents, hidden, agent.sep_coef)
        return _td_loss(q_sum, prep, mixer.view(), n_agents, embed, y_flat)

    worst = finite_diff_grads(loss_fn, [agent.store, mixer.store])
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 10.0
    assert _report("criterion 1 gradient soundness",
                   ok, f"max rel err {worst:.3e} (tol 1e-4), runtime {elapsed:.1f}s (< 10s)")


# ---------------------------------------------------------------------------
# criterion 2: masking / isolation


def test_criterion_02_masking_isolation():
    cfg = TrainConfig(env="role_grid", algo="manger", seed=3, hidden_dim=8,
                      mixing_embed_dim=4, rnd_dim=4, batch_size=4, batch_size_run=2,
                      buffer_size=50, total_steps=10_000, outdir="unused")
    state = init_train_state(cfg)
    while len(state.replay) < cfg.batch_size:
        for ep in collect_interval(state.envs, state.agent, 1.0, state.env_streams):
            state.replay.add(ep)
    batch = sample(state.replay, cfg.batch_size, state.sampler)
    y = td_lambda_targets(batch, state.targets, state, cfg.gamma, cfg.td_lambda)
    trial_rng = np.random.default_rng(0)
    n = state.agent.n_agents
    violations = 0
    for _ in range(100):
        budgets = trial_rng.integers(0, 4, n)
        report = NoveltyReport(np.zeros((1, 1, n)), np.zeros(n), 0.0, 1.0,
                               budgets.astype(np.int64))
        before = state.agent.store.snapshot()
        before_rnd = {k: v.tobytes() for k, v in state.rnd.target.items()}
        before_tgt = {k: v.tobytes() for k, v in state.targets.agent.items()}
        before_tgt_m = {k: v.tobytes() for k, v in state.targets.mixer.items()}
        extra_update_phase(batch, state, report, y, lr=1e-3)
        after = state.agent.store.snapshot()
        for name in state.agent.trunk_names():
            violations += after[name].tobytes() != before[name].tobytes()
        for i in range(n):
            changed = any(after[p].tobytes() != before[p].tobytes()
                          for p in state.agent.sep_names(i))
            if budgets[i] > 0:
                violations += not changed
            else:
                violations += changed
        violations += {k: v.tobytes() for k, v in state.rnd.target.items()} != before_rnd
        violations += {k: v.tobytes() for k, v in state.targets.agent.items()} != before_tgt
        violations += {k: v.tobytes() for k, v in state.targets.mixer.items()} != before_tgt_m
    assert _report("criterion 2 masking isolation",
                   violations == 0, f"{violations} violations in 100 trials (zero tolerance)")


# ---------------------------------------------------------------------------
# criterion 3: extra-update formula conformance


def test_criterion_03_budget_formula_conformance():
    rng = np.random.default_rng(7)
    mismatches = 0
    scale_mismatches = 0
    for _ in range(1000):
        b, t, n = rng.integers(1, 6), rng.integers(1, 8), rng.integers(2, 6)
        per_obs = rng.uniform(0, 3, (b, t, n)) ** 2
        filled = rng.uniform(0, 1, (b, t)) > 0.3
        if not filled.any():
            filled[0, 0] = True
        per_obs = np.where(filled[..., None], per_obs, 0.0)
        alpha = float(rng.uniform(0, 6))
        beta = int(rng.integers(0, 5))
        got = extra_updates(per_obs, filled, alpha, beta).extra

        valid = per_obs[filled]
        pooled = valid.reshape(-1)
        mu, sd = pooled.mean(), pooled.std()
        for i in range(n):
            if sd < 1e-8:
                expected = 0
            else:
                expected = int(min(max(math.floor(alpha * (valid[:, i].mean() - mu) / sd), 0), beta))
            mismatches += got[i] != expected

        c = float(10.0 ** rng.uniform(-3, 3))
        scaled = extra_updates(per_obs * c, filled, alpha, beta).extra
        scale_mismatches += int(not np.array_equal(got, scaled))
    ok = mismatches == 0 and scale_mismatches == 0
    assert _report("criterion 3 budget formula",
                   ok, f"{mismatches} formula mismatches, {scale_mismatches} "
                       f"scale-invariance breaks over 1000 batches (exact)")


# ---------------------------------------------------------------------------
# criterion 4: baseline reduction to plain value-decomposition updates


def _clone_store(store: ParamStore) -> ParamStore:
    clone = ParamStore()
    for name, entry in store.entries():
        clone.add(name, entry.value.data.copy())
        c = clone.entry(name)
        c.adam_m = entry.adam_m.copy()
        c.adam_v = entry.adam_v.copy()
        c.step_count = entry.step_count
    return clone


def _reference_qmix_update(agent_store, mixer_store, agent_arch, mixer_arch, batch, y, lr):
    """Textbook one-pass update assembled from the same primitives: per-agent
    recurrent forward, per-episode scalar mixing, mean squared TD error."""
    from manger.nets import AgentNetParams, MixerParams, mixer_forward, sep_head, trunk_q_com, trunk_step
    from manger.numcore import add, gather_last, mean_, mul, stack0, sub

    agent = AgentNetParams(agent_store, *agent_arch)
    mixer = MixerParams(mixer_store, *mixer_arch)
    view = agent.view()
    b, t, n = batch.obs.shape[:3]
    totals = []
    for k in range(b):
        h = Tensor(np.zeros((n, agent.hidden_dim)))
        per_step = []
        for step in range(int(batch.lengths[k])):
            h = trunk_step(view, Tensor(batch.obs[k, step]), h)
            q = trunk_q_com(view, h)
            if agent.sep_coef != 0.0:
                heads = stack0([sep_head(view, i, Tensor(h.data[i])) for i in range(n)])
                q = add(q, mul(heads, agent.sep_coef))
            taken = gather_last(q, batch.actions[k, step])
            per_step.append(mixer_forward(taken, batch.state[k, step], mixer))
        totals.extend(sub(q_tot, float(y[k, i])) for i, q_tot in enumerate(per_step))
    err = stack0(totals)
    loss = mean_(mul(err, err))
    backward(loss)
    adam_step(agent_store, lr)
    adam_step(mixer_store, lr)


def test_criterion_04_baseline_reduction():
    cfg = TrainConfig(env="symmetry_break", algo="qmix", seed=5, hidden_dim=8,
                      mixing_embed_dim=4, rnd_dim=4, batch_size=8, batch_size_run=2,
                      buffer_size=100, total_steps=10**9, anneal_steps=300,
                      td_lambda=0.0, eval_every=10**9, outdir="unused")
    state = init_train_state(cfg)
    agent_arch = (state.agent.n_agents, state.agent.input_dim,
                  state.agent.n_actions, state.agent.hidden_dim, state.agent.sep_coef)
    mixer_arch = (state.mixer.n_agents, state.mixer.state_dim, state.mixer.embed_dim)
    worst = 0.0
    steps_done = 0
    while steps_done < 200:
        for ep in collect_interval(state.envs, state.agent, 0.5, state.env_streams):
            state.replay.add(ep)
        batch = sample(state.replay, cfg.batch_size, state.sampler)
        if batch is None:
            continue
        y = td_lambda_targets(batch, state.targets, state, cfg.gamma, cfg.td_lambda)
        ref_agent = _clone_store(state.agent.store)
        ref_mixer = _clone_store(state.mixer.store)
        global_update(batch, state, y, cfg.lr, passes=1)
        _reference_qmix_update(ref_agent, ref_mixer, agent_arch, mixer_arch,
                               batch, y, cfg.lr)
        for live, ref in ((state.agent.store, ref_agent), (state.mixer.store, ref_mixer)):
            for name in live.names():
                diff = np.abs(live[name].data - ref[name].data).max()
                worst = max(worst, diff)
        steps_done += 1
    assert _report("criterion 4 baseline reduction",
                   worst < 1e-12,
                   f"max per-step parameter deviation {worst:.3e} over 200 steps (tol 1e-12)")


# ---------------------------------------------------------------------------
# criteria 5-9: directional experiments


def test_criterion_05_symmetry_breaking(symmetry_runs):
    qmix_clean = True
    for seed in SEEDS:
        result, _ = symmetry_runs[("qmix", seed)]
        evals = [r.eval_return for r in result.rows if r.eval_return is not None]
        qmix_clean &= all(v == 0.0 for v in evals)
    manger_hits = 0
    slowest = 0.0
    for seed in SEEDS:
        result, elapsed = symmetry_runs[("manger", seed)]
        slowest = max(slowest, elapsed)
        reached = any(
            r.eval_return is not None and r.eval_return >= 0.95 and r.episodes <= 5000
            for r in result.rows
        )
        manger_hits += reached and _final(result.rows, "eval_return") >= 0.95
    ok = qmix_clean and manger_hits >= 4 and slowest < 300.0
    assert _report(
        "criterion 5 symmetry breaking",
        ok,
        f"qmix exactly 0 at every eval: {qmix_clean}; manger >= 0.95: "
        f"{manger_hits}/5 seeds; slowest seed {slowest:.0f}s (< 300s)")


def test_criterion_06_diversity_metric(role_runs):
    manger_cos = [ _final(role_runs[("manger", s)].rows, "q_cosine_mean") for s in SEEDS ]
    qmix_cos = [ _final(role_runs[("qmix_id", s)].rows, "q_cosine_mean") for s in SEEDS ]
    gap = float(np.median(qmix_cos) - np.median(manger_cos))
    assert _report(
        "criterion 6 diversity metric",
        gap >= 0.1,
        f"median off-diag cosine manger {np.median(manger_cos):.3f} vs "
        f"qmix+id {np.median(qmix_cos):.3f}, gap {gap:.3f} (need >= 0.1)")


def test_criterion_07_extra_update_budget(role_runs):
    means = []
    for seed in SEEDS:
        rows = role_runs[("manger", seed)].rows
        means.append(float(np.mean([r.mean_extra_updates for r in rows
                                    if r.mean_extra_updates is not None])))
    worst = max(means)
    assert _report(
        "criterion 7 extra-update budget",
        worst < 0.5,
        f"run-averaged mean extra updates per seed {['%.3f' % m for m in means]} "
        f"(alpha=2, each < 0.5)")


def test_criterion_08_overhead(role_runs):
    manger_wall = float(np.mean([r.wall_ms_per_step for r in role_runs[("manger", 0)].rows]))
    qmix_wall = float(np.mean([r.wall_ms_per_step for r in role_runs[("qmix_plain", 0)].rows]))
    ratio = manger_wall / qmix_wall
    assert _report(
        "criterion 8 training-time overhead",
        ratio <= 1.5,
        f"manger {manger_wall:.0f} ms/step vs qmix {qmix_wall:.0f} ms/step, "
        f"ratio {ratio:.2f} (need <= 1.5)")


def test_criterion_09_ablation_ordering(chain_runs):
    finals = {
        algo: [ _final(chain_runs[(algo, s)].rows, "eval_success") for s in SEEDS ]
        for algo in ("manger", "qmix_sep_fixed", "qmix")
    }
    pairwise = sum(m >= f for m, f in zip(finals["manger"], finals["qmix_sep_fixed"]))
    med = {algo: float(np.median(v)) for algo, v in finals.items()}
    ok = (pairwise >= 3
          and med["manger"] >= med["qmix"]
          and med["qmix_sep_fixed"] >= med["qmix"])
    assert _report(
        "criterion 9 ablation ordering",
        ok,
        f"final success manger {finals['manger']}, fixed {finals['qmix_sep_fixed']}, "
        f"qmix {finals['qmix']}; manger >= fixed in {pairwise}/5 seeds; "
        f"medians {med}")


# ---------------------------------------------------------------------------
# criterion 10: bit-exact reproducibility


def _strip_wall_column(text: str) -> str:
    # wall_ms_per_step is wall-clock time, the one column that cannot be
    # bit-identical between repeated runs; it is the last column
    return "\n".join(line.rsplit(",", 1)[0] for line in text.splitlines())


def test_criterion_10_determinism(tmp_path):
    mismatch = []
    for batch_size_run in (1, 8):
        blobs = []
        for attempt in ("a", "b"):
            outdir = tmp_path / f"det_{batch_size_run}_{attempt}"
            cfg = TrainConfig(env="role_grid", algo="manger", seed=11,
                              hidden_dim=8, mixing_embed_dim=4, rnd_dim=4,
                              batch_size=4, batch_size_run=batch_size_run,
                              buffer_size=100, total_steps=1500, anneal_steps=800,
                              eval_every=5, eval_episodes=2, outdir=str(outdir))
            result = train(cfg)
            echo = "\n".join(line for line in result.config_path.read_text().splitlines()
                             if not line.startswith("outdir"))
            blobs.append((
                _strip_wall_column(result.metrics_path.read_text()),
                result.checkpoint_path.read_bytes(),
                echo,
            ))
        if blobs[0] != blobs[1]:
            mismatch.append(batch_size_run)
    assert _report(
        "criterion 10 determinism",
        not mismatch,
        f"batch_size_run in (1, 8): metrics (wall column excluded), checkpoints "
        f"and config echoes bitwise identical; mismatches: {mismatch or 'none'}")


# ---------------------------------------------------------------------------
# criterion 11: oracle conformance


def test_criterion_11_oracle_conformance(tmp_path):
    sym_ok = oracle_optimal(SymmetryBreak()) == (1.0, 1)
    chain_return, chain_steps = oracle_optimal(NoveltyChain())
    chain_ok = chain_return == 1.0 and chain_steps == 9

    cfg = TrainConfig(env="role_grid", algo="manger", seed=2, hidden_dim=8,
                      mixing_embed_dim=4, rnd_dim=4, batch_size=4, batch_size_run=4,
                      buffer_size=200, total_steps=4000, anneal_steps=2000,
                      eval_every=10, eval_episodes=2, outdir=str(tmp_path / "oracle"))
    result = train(cfg)
    env = make_env("role_grid")
    replays_checked = 0
    worst = 0.0
    for episode in result.state.replay.episodes():
        actual = episode.total_reward
        redone = resimulate(env, episode.actions)
        worst = max(worst, abs(actual - redone))
        replays_checked += 1
    ok = sym_ok and chain_ok and worst < 1e-12 and replays_checked > 0
    assert _report(
        "criterion 11 oracle conformance",
        ok,
        f"symmetry enumeration (1.0, 1): {sym_ok}; chain BFS (1.0, 9): {chain_ok}; "
        f"{replays_checked} logged episodes re-simulated, max deviation {worst:.2e}")
