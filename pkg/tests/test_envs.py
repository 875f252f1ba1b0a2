import numpy as np
import pytest

from manger.envs import (
    EnvContractError,
    NoveltyChain,
    RoleGrid,
    SymmetryBreak,
    make_env,
    oracle_optimal,
    resimulate,
)


class TestSymmetryBreak:
    def test_rewards_differing_actions(self):
        env = SymmetryBreak()
        env.reset(0)
        _, _, reward, done, _ = env.step([0, 1])
        assert reward == 1.0 and done

    def test_same_actions_score_zero(self):
        env = SymmetryBreak()
        env.reset(0)
        assert env.step([1, 1])[2] == 0.0

    def test_single_step_horizon(self):
        env = SymmetryBreak()
        env.reset(0)
        env.step([0, 1])
        with pytest.raises(EnvContractError):
            env.step([0, 1])

    def test_oracle(self):
        assert oracle_optimal(SymmetryBreak()) == (1.0, 1)


class TestRoleGrid:
    def test_reset_configuration(self):
        env = RoleGrid()
        obs, state = env.reset(0)
        assert obs.shape == (3, 6) and state.shape == (7,)
        np.testing.assert_array_equal(state, [0, 0, 0, 0.25, 0, 0.5, 0])
        assert not env._door_open

    def test_wall_blocks_off_door_column(self):
        env = RoleGrid()
        env.reset(0)
        env._pos = [[1, 0], [0, 1], [0, 2]]
        _, state, reward, _, _ = env.step([3, 4, 4])  # agent 0 tries to enter (2, 0)
        assert env._pos[0] == [1, 0]
        assert reward == pytest.approx(-0.01)

    def test_door_requires_switch(self):
        env = RoleGrid()
        env.reset(0)
        env._pos = [[1, 2], [0, 0], [0, 0]]
        env.step([3, 4, 4])  # door shut: blocked
        assert env._pos[0] == [1, 2]
        env._pos = [[1, 2], [0, 4], [0, 0]]
        env._door_open = True
        env.step([3, 4, 4])
        assert env._pos[0] == [2, 2]

    def test_door_flag_tracks_switch_occupancy(self):
        env = RoleGrid()
        env.reset(0)
        rng = np.random.default_rng(0)
        for _ in range(30):
            _, state, _, done, _ = env.step(rng.integers(0, 5, 3))
            assert state[-1] == float(any(tuple(p) == (0, 4) for p in env._pos))
            if done:
                env.reset(0)

    def test_at_most_one_goal_reward(self):
        env = RoleGrid()
        env.reset(0)
        rng = np.random.default_rng(1)
        for episode in range(20):
            env.reset(0)
            bonus_steps = 0
            for _ in range(env.max_steps):
                _, _, reward, done, _ = env.step(rng.integers(0, 5, 3))
                if reward > 0:
                    bonus_steps += 1
                if done:
                    break
            assert bonus_steps <= 1

    def test_oracle_is_joint_bfs_result(self):
        # frozen from the joint-state BFS: switch-holder opens the door on
        # step 2, the runner crosses and reaches the goal on step 5
        assert oracle_optimal(RoleGrid()) == (pytest.approx(10.0 - 0.05), 5)

    def test_manual_optimal_plan_matches_oracle_return(self):
        env = RoleGrid()
        env.reset(0)
        stay = 4
        plan = [
            [stay, stay, 0],  # agent 2 moves toward the switch
            [stay, stay, 0],  # agent 2 reaches the switch: door opens after this step
            [stay, 3, stay],  # agent 1 to (1, 1)
            [stay, 0, stay],  # agent 1 to (1, 2)
            [stay, 3, stay],  # agent 1 through the door (2, 2)
            [stay, 3, stay],  # agent 1 to (3, 2)
            [stay, 3, stay],  # agent 1 reaches the goal (4, 2)
        ]
        total = 0.0
        for joint in plan:
            _, _, reward, done, _ = env.step(joint)
            total += reward
            if done:
                break
        best, steps = oracle_optimal(RoleGrid())
        assert done and total == pytest.approx(10.0 - 0.01 * len(plan))
        assert total <= best and steps <= len(plan)


class TestNoveltyChain:
    def test_reset_at_origin(self):
        env = NoveltyChain()
        obs, state = env.reset(0)
        assert obs[0, 0] == 1.0 and obs[1, 0] == 1.0 and state.sum() == 2.0

    def test_joint_completion_pays(self):
        env = NoveltyChain()
        env.reset(0)
        env._pos = [8, 8]
        _, _, reward, done, _ = env.step([1, 1])
        assert reward == 1.0 and done

    def test_solo_completion_does_not_pay(self):
        env = NoveltyChain()
        env.reset(0)
        env._pos = [8, 3]
        _, _, reward, done, _ = env.step([1, 1])
        assert reward == 0.0 and not done

    def test_left_edge_clamps(self):
        env = NoveltyChain()
        env.reset(0)
        env.step([0, 0])
        assert env._pos == [0, 0]

    def test_oracle_nine_steps(self):
        assert oracle_optimal(NoveltyChain()) == (1.0, 9)


class TestHarnessContract:
    @pytest.mark.parametrize("name", ["symmetry_break", "role_grid", "novelty_chain"])
    def test_repeated_resets_identical(self, name):
        env = make_env(name)
        obs1, state1 = env.reset(7)
        obs2, state2 = env.reset(7)
        np.testing.assert_array_equal(obs1, obs2)
        np.testing.assert_array_equal(state1, state2)

    @pytest.mark.parametrize("name", ["symmetry_break", "role_grid", "novelty_chain"])
    def test_random_episode_reward_matches_resimulation(self, name):
        env = make_env(name)
        rng = np.random.default_rng(3)
        env.reset(0)
        actions, total = [], 0.0
        for _ in range(env.max_steps):
            joint = rng.integers(0, env.n_actions, env.n_agents)
            actions.append(joint)
            _, _, reward, done, _ = env.step(joint)
            total += reward
            if done:
                break
        assert resimulate(env, np.array(actions)) == pytest.approx(total, abs=1e-12)

    def test_unknown_env_rejected(self):
        with pytest.raises(ValueError):
            make_env("pong")

    def test_horizon_enforced(self):
        env = NoveltyChain()
        env.reset(0)
        done = False
        for _ in range(env.max_steps):
            done = env.step([0, 0])[3]
        assert done
