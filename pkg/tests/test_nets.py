import numpy as np
import pytest

from manger.nets import (
    AgentNetParams,
    agent_forward,
    augment_obs,
    init_agent_net,
    init_mixer,
    init_rnd,
    make_target_set,
    mixer_forward,
    rnd_novelty,
    select_action,
    sync_targets,
)
from manger.numcore import RngStream, STREAM_INIT, Tensor, adam_step, backward, mul, sub, sum_
from manger.nets import rnd_embed


@pytest.fixture
def small_agent():
    return init_agent_net(n_agents=2, input_dim=3, n_actions=4, hidden_dim=5,
                          sep_coef=0.5, rng=RngStream(0, STREAM_INIT))


class TestAgentForward:
    def test_sep_coef_zero_gives_pure_shared(self, small_agent):
        small_agent.sep_coef = 0.0
        obs, h = np.ones(3), np.zeros(5)
        q_sum, q_com, _, _ = agent_forward(obs, h, 0, small_agent)
        np.testing.assert_array_equal(q_sum.data, q_com.data)

    def test_combination_rule_at_half(self):
        # trunk forced to emit q_com=[1,1] and head 0 to emit q_sep=[2,-2]
        params = init_agent_net(2, 2, 2, 3, sep_coef=0.5, rng=RngStream(1, 0))
        for name in params.store.names():
            params.store[name].data[:] = 0.0
        params.store["fc2_b"].data[:] = [1.0, 1.0]
        params.store["sep0_b"].data[:] = [2.0, -2.0]
        q_sum, q_com, q_sep, _ = agent_forward(np.zeros(2), np.zeros(3), 0, params)
        np.testing.assert_array_equal(q_com.data, [1.0, 1.0])
        np.testing.assert_array_equal(q_sep.data, [2.0, -2.0])
        np.testing.assert_array_equal(q_sum.data, [2.0, 0.0])

    def test_agents_share_trunk_and_differ_by_heads(self, small_agent):
        obs, h = np.full(3, 0.3), np.full(5, 0.1)
        q0, c0, s0, _ = agent_forward(obs, h, 0, small_agent)
        q1, c1, s1, _ = agent_forward(obs, h, 1, small_agent)
        np.testing.assert_array_equal(c0.data, c1.data)
        np.testing.assert_allclose(q0.data - q1.data, 0.5 * (s0.data - s1.data),
                                   atol=1e-15, rtol=0)

    def test_sep_scale_linearity(self, small_agent):
        obs, h = np.full(3, -0.2), np.zeros(5)
        small_agent.sep_coef = 0.3
        qa, _, qs, _ = agent_forward(obs, h, 1, small_agent)
        small_agent.sep_coef = 0.6
        qb, _, _, _ = agent_forward(obs, h, 1, small_agent)
        np.testing.assert_allclose(qb.data - qa.data, 0.3 * qs.data, atol=1e-15, rtol=0)

    def test_agent_index_out_of_range(self, small_agent):
        with pytest.raises(IndexError):
            agent_forward(np.zeros(3), np.zeros(5), 2, small_agent)


class TestMixer:
    def test_degenerate_parameters_give_constant(self):
        mixer = init_mixer(n_agents=3, state_dim=4, embed_dim=6, rng=RngStream(2, 0))
        for name in mixer.store.names():
            mixer.store[name].data[:] = 0.0
        mixer.store["v2_b"].data[:] = 2.5
        out = mixer_forward(np.array([5.0, -1.0, 3.0]), np.ones(4), mixer)
        assert out.item() == pytest.approx(2.5, abs=1e-15)

    def test_monotone_in_every_agent_utility(self):
        rng = np.random.default_rng(7)
        for trial in range(200):
            mixer = init_mixer(2, 3, 4, RngStream(trial, 0))
            q = rng.uniform(-2, 2, 2)
            s = rng.uniform(-1, 1, 3)
            base = mixer_forward(q, s, mixer).item()
            for i in range(2):
                bumped = q.copy()
                bumped[i] += 1e-4
                assert mixer_forward(bumped, s, mixer).item() - base >= -1e-12

    def test_matches_independent_dense_evaluation(self):
        mixer = init_mixer(3, 5, 4, RngStream(11, 0))
        rng = np.random.default_rng(3)
        q = rng.uniform(-1, 1, 3)
        s = rng.uniform(-1, 1, 5)
        got = mixer_forward(q, s, mixer).item()

        p = {name: mixer.store[name].data for name in mixer.store.names()}
        w1 = np.abs(p["hw1_l2_w"] @ np.maximum(p["hw1_l1_w"] @ s + p["hw1_l1_b"], 0.0)
                    + p["hw1_l2_b"]).reshape(3, 4)
        b1 = p["hb1_w"] @ s + p["hb1_b"]
        pre = q @ w1 + b1
        hidden = np.where(pre >= 0, pre, np.exp(pre) - 1.0)
        wf = np.abs(p["hwf_l2_w"] @ np.maximum(p["hwf_l1_w"] @ s + p["hwf_l1_b"], 0.0)
                    + p["hwf_l2_b"])
        v = p["v2_w"] @ np.maximum(p["v1_w"] @ s + p["v1_b"], 0.0) + p["v2_b"]
        expected = hidden @ wf + v[0]
        assert got == pytest.approx(expected, abs=1e-12)


class TestRnd:
    def test_predictor_copied_from_target_scores_zero(self):
        rnd = init_rnd(4, 6, RngStream(3, 0))
        rnd.predictor.load({k: v.copy() for k, v in rnd.target.items()})
        for _ in range(5):
            obs = np.random.default_rng(_).uniform(-1, 1, 4)
            assert rnd_novelty(obs, rnd) == 0.0

    def test_novelty_non_negative(self):
        rnd = init_rnd(3, 5, RngStream(4, 0))
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert rnd_novelty(rng.uniform(-3, 3, 3), rnd) >= 0.0

    def test_descent_on_fixed_obs_reduces_novelty(self):
        rnd = init_rnd(3, 5, RngStream(5, 0))
        obs = np.array([0.2, -0.4, 0.9])
        before = rnd_novelty(obs, rnd)
        target = Tensor(rnd.target["l2_w"] @ np.maximum(
            rnd.target["l1_w"] @ obs + rnd.target["l1_b"], 0.0) + rnd.target["l2_b"])
        for _ in range(50):
            pred = rnd_embed(rnd.predictor_view(), Tensor(obs))
            diff = sub(pred, target)
            backward(sum_(mul(diff, diff)))
            adam_step(rnd.predictor, lr=1e-3)
        assert rnd_novelty(obs, rnd) < before


class TestTargets:
    def test_hard_sync_bitwise(self, small_agent):
        mixer = init_mixer(2, 3, 4, RngStream(6, 0))
        targets = make_target_set(small_agent, mixer)
        small_agent.store["fc1_w"].data += 1.0
        sync_targets(small_agent, mixer, targets, mode="hard")
        assert targets.agent["fc1_w"].tobytes() == small_agent.store["fc1_w"].data.tobytes()

    def test_soft_tau_one_equals_hard(self, small_agent):
        mixer = init_mixer(2, 3, 4, RngStream(6, 0))
        t_hard = make_target_set(small_agent, mixer)
        t_soft = make_target_set(small_agent, mixer)
        small_agent.store["fc1_b"].data += 0.5
        sync_targets(small_agent, mixer, t_hard, mode="hard")
        sync_targets(small_agent, mixer, t_soft, mode="soft", tau=1.0)
        np.testing.assert_array_equal(t_hard.agent["fc1_b"], t_soft.agent["fc1_b"])

    def test_soft_blend_arithmetic(self, small_agent):
        mixer = init_mixer(2, 3, 4, RngStream(6, 0))
        targets = make_target_set(small_agent, mixer)
        targets.agent["fc1_b"][:] = 0.0
        small_agent.store["fc1_b"].data[:] = 2.0
        sync_targets(small_agent, mixer, targets, mode="soft", tau=0.5)
        np.testing.assert_array_equal(targets.agent["fc1_b"], np.ones(5))

    def test_unknown_mode_rejected(self, small_agent):
        mixer = init_mixer(2, 3, 4, RngStream(6, 0))
        with pytest.raises(ValueError):
            sync_targets(small_agent, mixer, make_target_set(small_agent, mixer), mode="slow")


class TestSelectAction:
    def test_greedy_argmax(self):
        rng = RngStream(0, 0)
        assert select_action(np.array([1.0, 3.0, 2.0]), np.ones(3, bool), 0.0, rng) == 1

    def test_tie_breaks_to_lowest_index(self):
        rng = RngStream(0, 0)
        assert select_action(np.array([5.0, 5.0, 1.0]), np.ones(3, bool), 0.0, rng) == 0

    def test_greedy_consumes_no_randomness(self):
        rng = RngStream(0, 0)
        select_action(np.array([0.0, 1.0]), np.ones(2, bool), 0.0, rng)
        assert rng.draws == 0

    def test_unavailable_actions_never_selected(self):
        rng = RngStream(1, 0)
        avail = np.array([False, True, False])
        for _ in range(50):
            assert select_action(np.array([9.0, 0.0, 9.0]), avail, 1.0, rng) == 1

    def test_empty_availability_rejected(self):
        with pytest.raises(ValueError):
            select_action(np.zeros(2), np.zeros(2, bool), 0.0, RngStream(0, 0))

    def test_full_exploration_is_uniform(self):
        rng = RngStream(7, 0)
        n = 100_000
        counts = np.zeros(3)
        for _ in range(n):
            counts[select_action(np.array([9.0, 1.0, 5.0]), np.ones(3, bool), 1.0, rng)] += 1
        freq = counts / n
        sigma = np.sqrt((1 / 3) * (2 / 3) / n)
        assert np.all(np.abs(freq - 1 / 3) < 3 * sigma)


class TestAugmentObs:
    def test_disabled_returns_input(self):
        obs = np.ones((2, 3))
        np.testing.assert_array_equal(augment_obs(obs, 0, 4, False), obs)

    def test_appends_one_hot(self):
        out = augment_obs(np.zeros((2, 3)), np.array([0, 2]), 3, True)
        np.testing.assert_array_equal(out[:, 3:], [[1, 0, 0], [0, 0, 1]])
