import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from banditmdp import envs
from banditmdp import mdp as M


def chain_hitting_closed_form(N):
    # interior walk: right w.p. 1/3, left w.p. 2/3, reflecting at the first state
    return 2 ** (N + 1) - 4 - 3 * (N - 1)


class TestHardChain:
    def test_uniform_policy_walk(self):
        m = envs.hard_chain(6)
        K = M.induced_kernel(m, M.uniform_policy(6, 3))
        expected = np.zeros((6, 6))
        expected[0, 1] = 1.0
        for i in range(1, 5):
            expected[i, i - 1] = 2 / 3
            expected[i, i + 1] = 1 / 3
        expected[5, 0] = 1.0
        np.testing.assert_allclose(K, expected, atol=1e-15)

    def test_rewards_normalized(self):
        m = envs.hard_chain(5, big_reward=32.0)
        assert m.mean_rewards.max() == 1.0
        assert m.mean_rewards[2, 0] == pytest.approx(1 / 32)
        assert m.mean_rewards[2, envs.RIGHT_ACTION] == 0.0
        assert not m.mean_rewards[0].any()

    def test_default_big_reward(self):
        assert envs.default_chain_reward(8) == 256.0
        assert envs.default_chain_reward(30) == 1e6

    def test_too_short(self):
        with pytest.raises(ValueError):
            envs.hard_chain(2)

    def test_hitting_time_small(self):
        assert envs.chain_hitting_time(3) == pytest.approx(6.0, abs=1e-10)

    @pytest.mark.parametrize("N", range(3, 13))
    def test_hitting_time_closed_form(self, N):
        assert envs.chain_hitting_time(N) == pytest.approx(chain_hitting_closed_form(N), rel=1e-10)

    def test_hitting_time_simulation(self):
        rng = np.random.default_rng(0)
        N, episodes = 3, 100_000
        total = 0
        for _ in range(episodes):
            s, t = 0, 0
            while s != N - 1:
                s = 1 if s == 0 else (s + 1 if rng.random() < 1 / 3 else s - 1)
                t += 1
            total += t
        assert total / episodes == pytest.approx(envs.chain_hitting_time(N), rel=0.02)


class TestRandomErgodic:
    def test_uniform_mixing_one(self):
        m = envs.random_ergodic(4, 2, 1.0, 0.9, seed=3)
        np.testing.assert_allclose(m.transitions, 0.25)
        assert M.estimate_beta(m).beta == pytest.approx(0.25, abs=1e-14)

    def test_deterministic_in_seed(self):
        a = envs.random_ergodic(4, 3, 0.3, 0.9, seed=5)
        b = envs.random_ergodic(4, 3, 0.3, 0.9, seed=5)
        assert a == b

    @given(st.integers(1, 6), st.integers(1, 4), st.floats(0.01, 1.0), st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_entry_floor(self, S, A, eps, seed):
        m = envs.random_ergodic(S, A, eps, 0.9, seed=seed)
        assert m.transitions.min() >= eps / S - 1e-15

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            envs.random_ergodic(3, 2, 0.0, 0.9)


class TestStickyStream:
    def test_phases(self):
        reward = envs.sticky_reward_stream(10, 5)
        assert (reward(1, 0), reward(1, 1)) == (1.0, 0.0)
        assert (reward(6, 0), reward(6, 1)) == (0.0, 1.0)

    def test_partition(self):
        reward = envs.sticky_reward_stream(10, 5)
        assert sum(reward(t, 0) + reward(t, 1) for t in range(10)) == 10

    def test_bad_split(self):
        with pytest.raises(ValueError):
            envs.sticky_reward_stream(10, 10)


class TestEnvSpec:
    def test_defaults(self):
        m = envs.make_env(envs.EnvSpec("random_ergodic"))
        assert (m.num_states, m.num_actions, m.gamma) == (4, 3, 0.9)

    def test_unknown_param(self):
        with pytest.raises(ValueError, match="epsilon"):
            envs.make_env(envs.EnvSpec("hard_chain", {"epsilon": 0.1}))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            envs.EnvSpec("gridworld")

    def test_file_kind(self, tmp_path):
        m = envs.two_state(0.8)
        M.save(m, tmp_path / "m.txt")
        assert envs.make_env(envs.EnvSpec("file", {"path": str(tmp_path / "m.txt")})) == m

    @pytest.mark.parametrize("kind", ["hard_chain", "random_ergodic", "two_state", "cycle"])
    def test_every_kind_valid(self, kind):
        m = envs.make_env(envs.EnvSpec(kind))
        np.testing.assert_allclose(m.transitions.sum(axis=2), 1.0, atol=1e-12)
