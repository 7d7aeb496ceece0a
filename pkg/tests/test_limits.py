import math

import numpy as np
import pytest

from mdpgen import ring2, self_loop
from occumax.dual import minimize_dual
from occumax.environments import make_ring, make_toy, toy_closed_form
from occumax.exceptions import InvalidWeights, NotCommunicating
from occumax.limits import solve_alpha_zero, solve_beta_zero, solve_unregularized
from occumax.mdp import Mdp
from occumax.primal import total_variation


def toy_gap(v):
    return v[0] - v[2]


class TestBetaZero:
    def test_toy_n1(self):
        sol = solve_beta_zero(make_toy(1), 1.0)
        assert toy_gap(sol.v_star) == pytest.approx(0.0, abs=1e-9)

    def test_toy_n3(self):
        sol = solve_beta_zero(make_toy(3), 1.0)
        assert toy_gap(sol.v_star) == pytest.approx(math.log(6 / 4), abs=1e-9)
        # outer -> other outer
        assert sol.pi_star[0] == pytest.approx(1 / 3, abs=1e-9)

    def test_single_state(self):
        sol = solve_beta_zero(self_loop(2), 1.0)
        assert sol.eta == pytest.approx(math.log(2))
        np.testing.assert_allclose(sol.pi_star, 0.5)

    def test_occupancy_matches_closed_form(self):
        sol = solve_beta_zero(make_toy(2), 1.0)
        ref = toy_closed_form(2, 1.0, 0.0)
        np.testing.assert_allclose(sol.state_dist[:2], ref.p_outer, atol=1e-9)

    def test_continuity_from_small_beta(self):
        m = make_toy(3)
        near = minimize_dual(m, 1.0, 1e-3)
        assert toy_gap(near.v_star) == pytest.approx(toy_gap(solve_beta_zero(m, 1.0).v_star), abs=5e-3)

    def test_needs_communicating(self):
        with pytest.raises(NotCommunicating):
            solve_beta_zero(Mdp.from_lists([[[(0, 1.0)]], [[(1, 1.0)]]]), 1.0)

    def test_needs_positive_alpha(self):
        with pytest.raises(InvalidWeights):
            solve_beta_zero(ring2(), 0.0)


class TestAlphaZero:
    @pytest.mark.parametrize("n,u", [(1, 0.0), (4, -math.log(2) / 2)])
    def test_toy_value_gap(self, n, u):
        sol = solve_alpha_zero(make_toy(n), 1.0)
        assert toy_gap(sol.v_star) == pytest.approx(u, abs=5e-3)

    def test_continuity_from_small_alpha(self):
        m = make_toy(3)
        near = minimize_dual(m, 1e-3, 1.0)
        sol = solve_alpha_zero(m, 1.0)
        assert total_variation(near.state_dist, sol.state_dist) < 5e-3

    def test_ring_uniform_periodic_and_tied(self):
        sol = solve_alpha_zero(make_ring(5), 1.0)
        np.testing.assert_allclose(sol.state_dist, 0.2, atol=1e-6)
        assert not sol.unique_policy
        assert all(t == [0, 1] for t in sol.tie_sets)
        assert sol.periodic

    def test_ladder_validation(self):
        with pytest.raises(ValueError):
            solve_alpha_zero(ring2(), 1.0, ladder=[0.1])
        with pytest.raises(InvalidWeights):
            solve_alpha_zero(ring2(), 0.0)


class TestUnregularized:
    def test_constant_reward(self):
        sol = solve_unregularized(self_loop(1, [2.5]))
        assert sol.eta == pytest.approx(2.5)

    def test_ring_alternating_reward(self):
        m = Mdp.from_lists([[[(1, 1.0)]], [[(0, 1.0)]]], [[1.0], [0.0]])
        assert solve_unregularized(m).eta == pytest.approx(0.5)

    def test_toy_zero_reward(self):
        sol = solve_unregularized(make_toy(3))
        assert sol.eta == pytest.approx(0.0, abs=1e-12)
        assert sol.extras["bellman_residual"] < 1e-9
        assert not sol.unique_policy

    def test_picks_best_loop(self):
        m = Mdp.from_lists([[[(0, 1.0)], [(1, 1.0)]], [[(1, 1.0)], [(0, 1.0)]]], [[0.2, 0.0], [0.9, 0.0]])
        sol = solve_unregularized(m)
        assert sol.eta == pytest.approx(0.9)
        assert sol.pi_star[2] == 1.0

    def test_needs_communicating(self):
        with pytest.raises(NotCommunicating):
            solve_unregularized(Mdp.from_lists([[[(0, 1.0)], [(1, 1.0)]], [[(1, 1.0)]]]))
