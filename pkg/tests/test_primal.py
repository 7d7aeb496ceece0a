import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdpgen import log_uniform, random_mdp, random_policy, ring2, self_loop
from occumax.environments import make_toy
from occumax.exceptions import InvalidWeights
from occumax.mdp import Mdp
from occumax.primal import (average_total_reward, directional_second_derivative, flow_residual,
                            occupancy_from_policy, policy_from_joint, stationary_distribution)


def two_by_two():
    return Mdp.from_lists([[[(0, 1.0)], [(1, 1.0)]], [[(0, 1.0)], [(1, 1.0)]]])


class TestAverageTotalReward:
    def test_uniform_entropy(self):
        p = np.full(4, 0.25)
        assert average_total_reward(p, two_by_two(), 1, 1) == pytest.approx(math.log(4))

    def test_action_entropy_only(self):
        p = np.full(4, 0.25)
        assert average_total_reward(p, two_by_two(), 1, 0) == pytest.approx(math.log(2))

    def test_point_mass_is_reward(self):
        m = Mdp.from_lists([[[(0, 1.0)], [(1, 1.0)]], [[(0, 1.0)]]], [[5.0, 0.0], [0.0]])
        p = np.array([1.0, 0.0, 0.0])
        assert average_total_reward(p, m, 2.0, 3.0) == pytest.approx(5.0)

    def test_batched(self):
        p = np.array([[0.25] * 4, [1.0, 0, 0, 0]])
        np.testing.assert_allclose(average_total_reward(p, two_by_two(), 1, 1), [math.log(4), 0.0])

    def test_negative_weight(self):
        with pytest.raises(InvalidWeights):
            average_total_reward(np.full(4, 0.25), two_by_two(), -1, 1)


class TestSecondDerivative:
    def test_action_direction(self):
        p = np.full(4, 0.25)
        u = np.array([1.0, -1.0, 0.0, 0.0])
        assert directional_second_derivative(p, u, two_by_two(), 1, 1) == pytest.approx(-8.0)

    def test_state_direction(self):
        # p(s) = 1/2, so the state term is 2 * 2**2 / (1/2)
        p = np.full(4, 0.25)
        u = np.array([1.0, 1.0, -1.0, -1.0])
        m = two_by_two()
        exact = directional_second_derivative(p, u, m, 0, 1)
        assert exact == pytest.approx(-16.0)
        h = 1e-4
        f = lambda t: float(average_total_reward(p + t * u, m, 0, 1))
        assert (f(h) - 2 * f(0) + f(-h)) / h**2 == pytest.approx(exact, rel=1e-5)

    def test_zero_direction(self):
        p = np.full(4, 0.25)
        assert directional_second_derivative(p, np.zeros(4), two_by_two(), 1, 1) == 0.0

    def test_boundary_rejected(self):
        with pytest.raises(ValueError):
            directional_second_derivative(np.array([0.5, 0.5, 0, 0]), np.zeros(4), two_by_two(), 1, 1)

    def test_non_conserving_direction_rejected(self):
        with pytest.raises(ValueError):
            directional_second_derivative(np.full(4, 0.25), np.ones(4), two_by_two(), 1, 1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_finite_difference(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mdp(rng, max_states=4, max_actions=3)
        a, b = log_uniform(rng, 0.1, 10), log_uniform(rng, 0.1, 10)
        if m.num_pairs < 2:
            return
        p = rng.dirichlet(np.ones(m.num_pairs)) * 0.9 + 0.1 / m.num_pairs
        u = rng.normal(size=m.num_pairs)
        u -= u.mean()
        u /= np.abs(u / p).max()
        h = 1e-4
        f = lambda t: float(average_total_reward(p + t * u, m, a, b))
        fd = (f(h) - 2 * f(0) + f(-h)) / h**2
        exact = directional_second_derivative(p, u, m, a, b)
        assert fd == pytest.approx(exact, rel=1e-5)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_strictly_negative_for_positive_weights(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mdp(rng, max_states=4, max_actions=3, min_states=2)
        p = rng.dirichlet(np.ones(m.num_pairs))
        u = rng.normal(size=m.num_pairs)
        u -= u.mean()
        assert directional_second_derivative(p, u, m, 0.5, 0.2) < 0

    def test_action_entropy_alone_is_flat_along_state_moves(self):
        # u proportional to p within each state only moves state mass
        p = np.full(4, 0.25)
        u = np.array([1.0, 1.0, -1.0, -1.0])
        assert directional_second_derivative(p, u, two_by_two(), 1, 0) == pytest.approx(0.0)


class TestStationary:
    def test_periodic_ring(self):
        np.testing.assert_allclose(stationary_distribution(ring2(), [1.0, 1.0]), [0.5, 0.5])

    def test_absorbing(self):
        m = Mdp.from_lists([[[(1, 1.0)]], [[(1, 1.0)]]])
        np.testing.assert_allclose(stationary_distribution(m, [1.0, 1.0]), [0.0, 1.0], atol=1e-12)

    def test_toy_uniform_policy(self):
        m = make_toy(1)
        mu = stationary_distribution(m, np.full(m.num_pairs, 0.5))
        np.testing.assert_allclose(mu, [1 / 3, 1 / 3, 1 / 3], atol=1e-12)

    def test_init_matters_for_disconnected_chains(self):
        m = Mdp.from_lists([[[(0, 1.0)]], [[(1, 1.0)]]])
        np.testing.assert_allclose(stationary_distribution(m, [1, 1], init=[0.2, 0.8]), [0.2, 0.8])

    def test_bad_policy(self):
        with pytest.raises(ValueError):
            stationary_distribution(ring2(), [0.5, 1.0])


class TestOccupancy:
    def test_ring(self):
        np.testing.assert_allclose(occupancy_from_policy(ring2(), [1, 1]), [0.5, 0.5])

    def test_toy_uniform(self):
        m = make_toy(1)
        np.testing.assert_allclose(occupancy_from_policy(m, np.full(6, 0.5)), np.full(6, 1 / 6))

    def test_single_self_loop(self):
        np.testing.assert_allclose(occupancy_from_policy(self_loop(), [1.0]), [1.0])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_flow_balance(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mdp(rng)
        p = occupancy_from_policy(m, random_policy(rng, m))
        assert abs(p.sum() - 1) < 1e-10
        assert flow_residual(p, m) < 1e-8

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_policy_roundtrip_on_full_support(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mdp(rng)
        pi = random_policy(rng, m)
        p = occupancy_from_policy(m, pi)
        full = m.state_sums(p) > 1e-6
        back = policy_from_joint(p, m)
        mask = full[m.pair_state]
        np.testing.assert_allclose(back[mask], pi[mask], atol=1e-8)


class TestPolicyFromJoint:
    def test_uniform(self):
        np.testing.assert_allclose(policy_from_joint(np.full(4, 0.25), two_by_two()), 0.5)

    def test_zero_mass_row_is_uniform(self):
        m = Mdp.from_lists([[[(0, 1.0)], [(1, 1.0)]], [[(0, 1.0)], [(1, 1.0)], [(1, 1.0)]]])
        pi = policy_from_joint(np.array([0.3, 0.7, 0.0, 0.0, 0.0]), m)
        np.testing.assert_allclose(pi, [0.3, 0.7, 1 / 3, 1 / 3, 1 / 3])
