import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from banditmdp import envs
from banditmdp import mdp as M
from banditmdp.mdp import TabularMdp


def small_mdp(seed, S=None, A=None, gamma=None):
    rng = np.random.default_rng(seed)
    S = S or int(rng.integers(1, 6))
    A = A or int(rng.integers(1, 4))
    P = rng.dirichlet(np.ones(S), size=(S, A))
    g = float(rng.uniform(0, 0.95)) if gamma is None else gamma
    return TabularMdp(P, rng.random((S, A)), g)


def choice_cycle():
    """State 0: action 0 moves to 1 paying 1, action 1 stays paying 0; state 1 returns to 0."""
    P = np.zeros((2, 2, 2))
    P[0, 0, 1] = 1.0
    P[0, 1, 0] = 1.0
    P[1, :, 0] = 1.0
    r = np.array([[1.0, 0.0], [0.0, 0.0]])
    return TabularMdp(P, r, 0.5)


class TestConstruction:
    def test_rejects_bad_rows(self):
        P = np.array([[[0.5, 0.6]], [[1.0, 0.0]]])
        with pytest.raises(ValueError):
            TabularMdp(P, np.zeros((2, 1)), 0.5)

    def test_rejects_reward_out_of_range(self):
        with pytest.raises(ValueError):
            TabularMdp(np.ones((1, 1, 1)), np.array([[1.5]]), 0.5)

    def test_rejects_gamma_one(self):
        with pytest.raises(ValueError):
            TabularMdp(np.ones((1, 1, 1)), np.array([[0.5]]), 1.0)

    def test_arrays_read_only(self):
        m = M.TabularMdp(np.ones((1, 1, 1)), np.array([[0.5]]), 0.5)
        with pytest.raises(ValueError):
            m.transitions[0, 0, 0] = 0.0


class TestKernel:
    def test_uniform_over_uniform_transitions(self):
        m = envs.two_state(0.9)
        K = M.induced_kernel(m, M.uniform_policy(2, 2))
        np.testing.assert_allclose(K, 0.5)

    def test_deterministic_policy_selects_rows(self):
        m = small_mdp(3, S=3, A=3)
        pi = M.deterministic_policy([2, 0, 1], 3)
        K = M.induced_kernel(m, pi)
        for s, a in enumerate([2, 0, 1]):
            np.testing.assert_array_equal(K[s], m.transitions[s, a])

    def test_half_half_mix_by_hand(self):
        P = np.array([[[1.0, 0.0], [0.2, 0.8]], [[0.4, 0.6], [0.0, 1.0]]])
        m = TabularMdp(P, np.zeros((2, 2)), 0.5)
        K = M.induced_kernel(m, np.full((2, 2), 0.5))
        np.testing.assert_allclose(K, [[0.6, 0.4], [0.2, 0.8]], atol=1e-15)

    @given(st.integers(0, 2**31))
    @settings(max_examples=50, deadline=None)
    def test_rows_stochastic(self, seed):
        m = small_mdp(seed)
        rng = np.random.default_rng(seed + 1)
        K = M.induced_kernel(m, rng.dirichlet(np.ones(m.num_actions), size=m.num_states))
        np.testing.assert_allclose(K.sum(axis=1), 1.0, atol=1e-12)


class TestValues:
    @pytest.mark.parametrize("gamma", [0.0, 0.3, 0.9, 0.99])
    def test_single_state_geometric(self, gamma):
        m = TabularMdp(np.ones((1, 1, 1)), np.ones((1, 1)), gamma)
        vt = M.policy_evaluation(m, np.ones((1, 1)), tol=1e-12)
        assert vt.v[0] == pytest.approx(1 / (1 - gamma), abs=1e-9)

    def test_zero_rewards(self):
        m = TabularMdp(small_mdp(1, S=3, A=2).transitions, np.zeros((3, 2)), 0.9)
        vt = M.policy_evaluation(m, M.uniform_policy(3, 2))
        assert not vt.v.any() and not vt.q.any()

    def test_cycle_by_hand(self):
        vt = M.policy_evaluation(envs.cycle(2, 0.5), np.ones((2, 1)), tol=1e-13)
        np.testing.assert_allclose(vt.v, [4 / 3, 2 / 3], atol=1e-12)

    def test_warm_start_agrees(self):
        m = small_mdp(7, S=4, A=3, gamma=0.9)
        pi = M.uniform_policy(4, 3)
        cold = M.policy_evaluation(m, pi, tol=1e-12)
        warm = M.policy_evaluation(m, pi, tol=1e-12, v0=cold.v + 0.01)
        np.testing.assert_allclose(warm.v, cold.v, atol=1e-10)

    def test_batched_solve_matches_iteration(self):
        m = small_mdp(11, S=5, A=3, gamma=0.95)
        rng = np.random.default_rng(0)
        pis = rng.dirichlet(np.ones(3), size=(6, 5))
        batch = M.evaluate_policies(m, pis)
        for k in range(6):
            it = M.policy_evaluation(m, pis[k], tol=1e-12)
            np.testing.assert_allclose(batch.v[k], it.v, atol=1e-10)
            np.testing.assert_allclose(batch.q[k], it.q, atol=1e-10)

    @given(st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_value_tables_consistent(self, seed):
        m = small_mdp(seed)
        rng = np.random.default_rng(seed)
        pi = rng.dirichlet(np.ones(m.num_actions), size=m.num_states)
        vt = M.policy_evaluation(m, pi, tol=1e-11)
        hi = 1 / (1 - m.gamma)
        assert np.all(vt.v >= -1e-9) and np.all(vt.v <= hi + 1e-9)
        np.testing.assert_allclose(np.einsum("sa,sa->s", pi, vt.q), vt.v, atol=1e-9)
        np.testing.assert_allclose(vt.q, m.mean_rewards + m.gamma * m.transitions @ vt.v, atol=1e-9)

    def test_finite_horizon_zero_is_reward(self):
        m = small_mdp(5)
        pi = M.uniform_policy(m.num_states, m.num_actions)
        np.testing.assert_array_equal(M.finite_horizon_q(m, pi, 0), m.mean_rewards)

    def test_finite_horizon_cycle_one_step(self):
        qbar = M.finite_horizon_q(envs.cycle(2, 0.5), np.ones((2, 1)), 1)
        assert qbar[0, 0] == 1.0
        assert qbar[1, 0] == 0.5

    @given(st.integers(0, 2**31), st.integers(0, 60))
    @settings(max_examples=40, deadline=None)
    def test_finite_horizon_tail(self, seed, H):
        m = small_mdp(seed)
        pi = M.uniform_policy(m.num_states, m.num_actions)
        q = M.evaluate_policies(m, pi[None]).q[0]
        gap = np.max(np.abs(M.finite_horizon_q(m, pi, H) - q))
        assert gap <= m.gamma ** (H + 1) / (1 - m.gamma) + 1e-10


class TestOptimal:
    def test_single_state_bandit(self):
        m = TabularMdp(np.ones((1, 2, 1)), np.array([[1.0, 0.0]]), 0.9)
        pi, vt = M.optimal_policy(m)
        np.testing.assert_array_equal(pi, [[1.0, 0.0]])
        assert vt.v[0] == pytest.approx(10.0, abs=1e-8)

    def test_ties_go_to_lowest_index(self):
        m = TabularMdp(np.full((2, 3, 2), 0.5), np.full((2, 3), 0.4), 0.8)
        pi, _ = M.optimal_policy(m)
        np.testing.assert_array_equal(pi[:, 0], 1.0)

    def test_choice_cycle_gap_by_hand(self):
        m = choice_cycle()
        _, star = M.optimal_policy(m)
        unif = M.policy_evaluation(m, M.uniform_policy(2, 2), tol=1e-13)
        np.testing.assert_allclose(star.v, [4 / 3, 2 / 3], atol=1e-10)
        np.testing.assert_allclose(unif.v, [0.8, 0.4], atol=1e-10)
        np.testing.assert_allclose(star.v - unif.v, [8 / 15, 4 / 15], atol=1e-8)

    @pytest.mark.parametrize("N", [3, 4, 5])
    def test_hard_chain_goes_right(self, N):
        m = envs.hard_chain(N, gamma=0.9)
        S, A = m.num_states, m.num_actions
        best, best_v = None, None
        for acts in itertools.product(range(A), repeat=S):
            pi = M.deterministic_policy(acts, A)
            K = M.induced_kernel(m, pi)
            v = np.linalg.solve(np.eye(S) - m.gamma * K, M.policy_rewards(m, pi))
            if best_v is None or np.all(v >= best_v - 1e-12) and np.any(v > best_v + 1e-12):
                best, best_v = acts, v
        pi, star = M.optimal_policy(m)
        np.testing.assert_allclose(star.v, best_v, atol=1e-8)
        assert all(pi[i, envs.RIGHT_ACTION] == 1.0 for i in range(1, N - 1))

    @given(st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_dominates_random_policies(self, seed):
        m = small_mdp(seed)
        _, star = M.optimal_policy(m, tol=1e-10)
        rng = np.random.default_rng(seed)
        pis = rng.dirichlet(np.ones(m.num_actions), size=(8, m.num_states))
        assert np.all(M.evaluate_policies(m, pis).v <= star.v + 1e-9)


class TestStationary:
    def test_equal_rows(self):
        d = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(M.stationary_distribution(np.tile(d, (3, 1))), d, atol=1e-14)

    def test_two_by_two_by_hand(self):
        mu = M.stationary_distribution([[0.9, 0.1], [0.5, 0.5]])
        np.testing.assert_allclose(mu, [5 / 6, 1 / 6], atol=1e-14)

    def test_identity_not_ergodic(self):
        with pytest.raises(M.NotErgodicError):
            M.stationary_distribution(np.eye(3))

    def test_periodic_chain(self):
        np.testing.assert_allclose(M.stationary_distribution([[0, 1], [1, 0]]), [0.5, 0.5])

    def test_batched_marks_non_unique(self):
        mus = M.stationary_distributions(np.stack([np.eye(2), [[0.9, 0.1], [0.5, 0.5]]]))
        assert np.isnan(mus[0]).all()
        np.testing.assert_allclose(mus[1], [5 / 6, 1 / 6], atol=1e-14)

    @given(st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_against_matrix_power(self, seed):
        m = envs.random_ergodic(4, 2, 0.3, 0.9, seed=seed)
        K = M.induced_kernel(m, M.uniform_policy(4, 2))
        oracle = np.linalg.matrix_power(K, 512)[0]
        np.testing.assert_allclose(M.stationary_distribution(K), oracle, atol=1e-10)


class TestEstimators:
    def test_single_state_beta(self):
        m = TabularMdp(np.ones((1, 2, 1)), np.zeros((1, 2)), 0.5)
        assert M.estimate_beta(m).beta == 1.0

    def test_lazy_chain_beta(self):
        est = M.estimate_beta(envs.two_state(0.9))
        assert est.beta == pytest.approx(0.5, abs=1e-14)
        assert est.exhaustive

    def test_random_ergodic_floor_vs_enumeration(self):
        m = envs.random_ergodic(3, 2, 0.2, 0.9, seed=4)
        est = M.estimate_beta(m)
        oracle = min(
            np.linalg.matrix_power(M.induced_kernel(m, M.deterministic_policy(a, 2)), 1024)[0].min()
            for a in itertools.product(range(2), repeat=3)
        )
        assert est.exhaustive and est.samples == 8
        assert est.beta == pytest.approx(oracle, abs=1e-10)
        assert est.beta >= 0.2 / 3

    def test_beta_sampled_when_large(self):
        m = envs.random_ergodic(8, 4, 0.5, 0.9, seed=0)
        est = M.estimate_beta(m, policy_samples=64, cap=100)
        assert not est.exhaustive and est.samples == 64

    def test_non_ergodic_policy_named(self):
        with pytest.raises(M.AssumptionViolation) as info:
            M.estimate_beta(envs.hard_chain(5))
        assert info.value.policy is not None

    def test_contraction_example(self):
        # Dobrushin coefficient: ||(e_0 - e_1)K||_1 / ||e_0 - e_1||_1 = 0.8 / 2
        assert M.contraction_factor([[0.9, 0.1], [0.5, 0.5]]) == pytest.approx(0.4, abs=1e-15)
        assert M.tau_from_factor(0.4) == pytest.approx(-1 / math.log(0.4), rel=1e-15)
        assert M.tau_from_factor(0.4) == pytest.approx(1.0913566679372915, rel=1e-12)

    def test_mixing_equal_rows_floor(self):
        m = TabularMdp(np.full((3, 2, 3), 1 / 3), np.zeros((3, 2)), 0.9)
        est = M.estimate_mixing(m)
        assert est.factor == pytest.approx(0.0, abs=1e-15)
        assert est.tau == 1.0

    def test_mixing_identity_violation(self):
        m = TabularMdp(np.stack([np.eye(2)], axis=1), np.zeros((2, 1)), 0.9)
        with pytest.raises(M.AssumptionViolation):
            M.estimate_mixing(m)

    @given(st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_contraction_bounds_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        K = rng.dirichlet(np.ones(4), size=4)
        f = M.contraction_factor(K)
        d, d2 = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        assert np.abs((d - d2) @ K).sum() <= f * np.abs(d - d2).sum() + 1e-12

    def test_random_ergodic_mixing_bound(self):
        m = envs.random_ergodic(4, 3, 0.3, 0.9, seed=0)
        assert M.estimate_mixing(m).factor <= 0.7 + 1e-12


class TestRollforwardOccupancy:
    def test_constant_schedule_at_stationarity(self):
        m = envs.random_ergodic(3, 2, 0.4, 0.9, seed=2)
        pi = M.uniform_policy(3, 2)
        mu = M.stationary_distribution(M.induced_kernel(m, pi))
        nus = M.rollforward(mu, np.tile(pi, (10, 1, 1)), m)
        np.testing.assert_allclose(nus, np.tile(mu, (10, 1)), atol=1e-12)

    def test_one_step_by_hand(self):
        P = np.array([[[0.9, 0.1]], [[0.5, 0.5]]])
        m = TabularMdp(P, np.zeros((2, 1)), 0.5)
        nus = M.rollforward([0.25, 0.75], np.ones((2, 2, 1)), m)
        np.testing.assert_allclose(nus[1], [0.25 * 0.9 + 0.75 * 0.5, 0.25 * 0.1 + 0.75 * 0.5])

    @given(st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_simplex(self, seed):
        m = small_mdp(seed)
        rng = np.random.default_rng(seed)
        pis = rng.dirichlet(np.ones(m.num_actions), size=(20, m.num_states))
        nus = M.rollforward(rng.dirichlet(np.ones(m.num_states)), pis, m)
        assert np.all(nus >= -1e-12)
        np.testing.assert_allclose(nus.sum(axis=1), 1.0, atol=1e-10)

    def test_occupancy_gamma_zero(self):
        m = small_mdp(1, S=3, A=2, gamma=0.0)
        np.testing.assert_allclose(M.discounted_occupancy(m, M.uniform_policy(3, 2), 1), [0, 1, 0])

    def test_occupancy_absorbing(self):
        m = TabularMdp(np.ones((1, 1, 1)), np.zeros((1, 1)), 0.9)
        np.testing.assert_allclose(M.discounted_occupancy(m, np.ones((1, 1)), 0), [1.0])

    def test_occupancy_cycle_by_hand(self):
        d = M.discounted_occupancy(envs.cycle(2, 0.5), np.ones((2, 1)), 0)
        np.testing.assert_allclose(d, [2 / 3, 1 / 3], atol=1e-14)


class TestAugmentation:
    def test_sizes_and_blocks(self):
        aug = M.augment(envs.two_state(0.9), 1)
        assert aug.mdp.num_states == 4
        K = M.induced_kernel(aug.mdp, M.uniform_policy(4, 2))
        assert not K[:2, :2].any() and not K[2:, 2:].any()
        np.testing.assert_allclose(K[:2, 2:], 0.5)

    def test_rewards_tiled(self):
        m = small_mdp(3, S=3, A=2)
        aug = M.augment(m, 3)
        for h in range(4):
            for s in range(3):
                np.testing.assert_array_equal(aug.mdp.mean_rewards[aug.index(s, h)], m.mean_rewards[s])

    def test_horizon_zero_is_base(self):
        m = small_mdp(3)
        assert M.augment(m, 0).mdp == m

    def test_cap(self):
        with pytest.raises(ValueError):
            M.augment(small_mdp(3, S=5), 10, max_states=20)

    @given(st.integers(0, 2**31), st.integers(0, 10))
    @settings(max_examples=30, deadline=None)
    def test_stationary_is_tiled(self, seed, H):
        m = envs.random_ergodic(3, 2, 0.3, 0.9, seed=seed)
        pi = np.random.default_rng(seed).dirichlet(np.ones(2), size=3)
        K = M.induced_kernel(m, pi)
        mu = M.stationary_distribution(K)
        aug = M.augment(m, H)
        mut = M.stationary_distribution(M.induced_kernel(aug.mdp, aug.lift_policy(pi)))
        np.testing.assert_allclose(mut, np.tile(mu, H + 1) / (H + 1), atol=1e-10)

    def test_augmented_kernel_matches_augment(self):
        m = small_mdp(9, S=3, A=2)
        pi = M.uniform_policy(3, 2)
        aug = M.augment(m, 2)
        np.testing.assert_allclose(M.induced_kernel(aug.mdp, aug.lift_policy(pi)),
                                   M.augmented_kernel(M.induced_kernel(m, pi), 2), atol=1e-15)


class TestTextFormat:
    @given(st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_round_trip_exact(self, seed):
        m = small_mdp(seed)
        back = M.loads(M.dumps(m))
        assert back == m
        assert np.array_equal(back.transitions, m.transitions)

    def test_file_round_trip(self, tmp_path):
        m = envs.random_ergodic(3, 2, 0.2, 0.95, seed=1, reward_kind="bernoulli")
        M.save(m, tmp_path / "m.txt")
        back = M.load(tmp_path / "m.txt")
        assert back == m and back.reward_kind == "bernoulli"

    def test_bad_header(self):
        with pytest.raises(ValueError):
            M.loads("not-an-mdp\n")
