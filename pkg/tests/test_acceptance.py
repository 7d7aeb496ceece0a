"""The ten acceptance criteria, one test each; every test reports a summary line."""
import math
import time

import numpy as np

from mdpgen import (log_uniform, random_communicating_mdp, random_mdp, random_policy,
                    random_tiny_mdp)
from occumax.dual import dual_gradient, dual_value, minimize_dual
from occumax.environments import make_gridworld, make_ring, make_toy
from occumax.fixed_point import solve_fixed_point
from occumax.limits import solve_alpha_zero, solve_beta_zero, solve_unregularized
from occumax.mdp import Mdp
from occumax.oracle import best_deterministic_gain, brute_force_primal, finite_difference_gradient
from occumax.primal import (average_total_reward, directional_second_derivative,
                            occupancy_from_policy, total_variation)
from occumax.simulator import corridor_fraction, sample_trajectory

WEIGHT_PAIRS = [(1, 10), (1, 1), (2, 1), (10, 1)]


def test_toy_closed_forms(report):
    worst = {"dual": 0.0, "beta0": 0.0, "alpha0": 0.0}
    slowest = 0.0
    for n in (1, 2, 3, 5, 10):
        t0 = time.perf_counter()
        mdp = make_toy(n)
        sol = minimize_dual(mdp, 1.0, 1.0)
        worst["dual"] = max(worst["dual"],
                            np.max(np.abs(sol.state_dist[:2] - (n + 1) / (2 * (2 * n + 1)))),
                            np.max(np.abs(sol.state_dist[2:] - 1 / (2 * n + 1))))
        b0 = solve_beta_zero(mdp, 1.0)
        u_b = math.log(1 + math.sqrt(1 + 8 * n)) - 2 * math.log(2)
        worst["beta0"] = max(worst["beta0"], abs(b0.v_star[0] - b0.v_star[2] - u_b))
        a0 = solve_alpha_zero(mdp, 1.0)
        u_a = -math.log(n / 2) / 2 if n > 1 else 0.0
        worst["alpha0"] = max(worst["alpha0"], abs(a0.v_star[0] - a0.v_star[2] - u_a))
        slowest = max(slowest, time.perf_counter() - t0)
    ok = worst["dual"] < 1e-6 and worst["beta0"] < 1e-6 and worst["alpha0"] < 5e-3 and slowest < 1.0
    report(1, ok, f"toy: dual err {worst['dual']:.1e}, beta->0 u err {worst['beta0']:.1e}, "
                  f"alpha->0 u err {worst['alpha0']:.1e}, slowest case {slowest:.2f}s")
    assert worst["dual"] < 1e-6
    assert worst["beta0"] < 1e-6
    assert worst["alpha0"] < 5e-3
    assert slowest < 1.0


def test_strong_duality_random(report):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    gap = flow = 0.0
    for _ in range(200):
        mdp = random_mdp(rng, max_states=6, max_actions=4)
        a, b = log_uniform(rng, 0.1, 10), log_uniform(rng, 0.1, 10)
        sol = minimize_dual(mdp, a, b)
        gap = max(gap, abs(sol.r_max - float(average_total_reward(sol.p_star, mdp, a, b))))
        flow = max(flow, sol.flow_residual)
    elapsed = time.perf_counter() - t0
    ok = gap < 1e-7 and flow < 1e-7 and elapsed < 60
    report(2, ok, f"200 random MDPs: max gap {gap:.1e}, max flow residual {flow:.1e}, {elapsed:.1f}s")
    assert gap < 1e-7 and flow < 1e-7 and elapsed < 60


def test_gradient_matches_finite_differences(report):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        # a single state has an identically zero gradient, where relative error is undefined
        mdp = random_mdp(rng, max_states=6, max_actions=4, min_states=2)
        a, b = log_uniform(rng, 0.1, 10), log_uniform(rng, 0.1, 10)
        v = rng.normal(size=mdp.num_states)
        g = dual_gradient(v, mdp, a, b)
        fd = finite_difference_gradient(v, mdp, a, b, 1e-6)
        scale = max(float(np.max(np.abs(fd))), 1e-12)
        worst = max(worst, float(np.max(np.abs(g - fd))) / scale)
    report(3, worst < 1e-5, f"100 (MDP, V) pairs: max relative gradient error {worst:.1e}")
    assert worst < 1e-5


def test_concavity_and_convexity(report):
    rng = np.random.default_rng(2)
    primal_viol = dual_viol = second = -np.inf
    for _ in range(500):
        mdp = random_mdp(rng, max_states=5, max_actions=3)
        a, b = log_uniform(rng, 0.1, 10), log_uniform(rng, 0.1, 10)
        # primal chord between two feasible occupancies
        p1 = occupancy_from_policy(mdp, random_policy(rng, mdp))
        p2 = occupancy_from_policy(mdp, random_policy(rng, mdp))
        mid = average_total_reward(0.5 * (p1 + p2), mdp, a, b)
        ends = 0.5 * (average_total_reward(p1, mdp, a, b) + average_total_reward(p2, mdp, a, b))
        primal_viol = max(primal_viol, float(ends - mid))
        # dual chord
        v1, v2 = rng.normal(scale=3, size=(2, mdp.num_states))
        dmid = dual_value(0.5 * (v1 + v2), mdp, a, b)
        dends = 0.5 * (dual_value(v1, mdp, a, b) + dual_value(v2, mdp, a, b))
        dual_viol = max(dual_viol, dmid - dends)
        # second derivative at an interior point along a normalization-preserving direction
        p = rng.dirichlet(np.ones(mdp.num_pairs))
        u = rng.normal(size=mdp.num_pairs)
        u -= u.mean()
        second = max(second, directional_second_derivative(p, u, mdp, a, b))
    ok = primal_viol <= 1e-9 and dual_viol <= 1e-9 and second <= 1e-12
    report(4, ok, f"500 chords: primal concavity slack {primal_viol:.1e}, dual convexity slack "
                  f"{dual_viol:.1e}, max second derivative {second:.1e}")
    assert primal_viol <= 1e-9 and dual_viol <= 1e-9 and second <= 1e-12


def test_oracle_sandwich(report):
    rng = np.random.default_rng(3)
    worst_val = worst_tv = 0.0
    below = 0.0
    for _ in range(50):
        mdp = random_tiny_mdp(rng, max_dof=3)
        a, b = (float(x) for x in rng.choice([0.3, 1.0, 3.0], 2))
        res = brute_force_primal(mdp, a, b, 0.02)
        sol = minimize_dual(mdp, a, b)
        worst_val = max(worst_val, abs(sol.r_max - res.best_value))
        below = max(below, res.best_value - sol.r_max)
        worst_tv = max(worst_tv, total_variation(sol.p_star, res.best_occupancy))
    ok = worst_val < 2e-3 and worst_tv < 0.1 and below < 1e-9
    report(5, ok, f"50 tiny MDPs: max value diff {worst_val:.1e}, max occupancy TV {worst_tv:.1e}, "
                  f"oracle above dual by at most {below:.1e}")
    assert worst_val < 2e-3 and worst_tv < 0.1 and below < 1e-9


def test_fixed_point_matches_dual(report):
    mdps = [make_gridworld(n)[0] for n in (3, 5, 9)] + [make_toy(n) for n in (1, 3, 5)]
    worst = 0.0
    schemes_ok = True
    for mdp in mdps:
        for a, b in WEIGHT_PAIRS:
            fp = solve_fixed_point(mdp, a, b)
            du = minimize_dual(mdp, a, b)
            worst = max(worst, total_variation(fp.p_star, du.p_star))
            schemes_ok &= fp.extras["scheme"] == ("scheme2" if a > b else "scheme1")
    absorbing = Mdp.from_lists([[[(0, 1.0)], [(1, 1.0)]], [[(1, 1.0)]]])
    trace = []
    solve_fixed_point(absorbing, 1.0, 1.0, trace=trace)
    pinned = all(z[1] == 0.0 for z in trace)
    ok = worst < 1e-6 and schemes_ok and pinned
    report(6, ok, f"fixed point vs dual: max TV {worst:.1e}, scheme choice ok={schemes_ok}, "
                  f"absorbing z pinned at 0 over {len(trace)} iterates={pinned}")
    assert worst < 1e-6 and schemes_ok and pinned


def test_gridworld_corridor_trend(report):
    t0 = time.perf_counter()
    mono = True
    worst_z = 0.0
    for n in (3, 5, 9):
        mdp, spec = make_gridworld(n)
        corridor = list(spec.corridor_states)
        masses = []
        for i, a in enumerate(range(1, 11)):
            sol = minimize_dual(mdp, float(a), 10.0 / a)
            mass = float(sol.state_dist[corridor].sum())
            masses.append(mass)
            stats = sample_trajectory(mdp, sol.pi_star, 25000, seed=1000 * n + i)
            est = corridor_fraction(stats, spec, 10)
            worst_z = max(worst_z, abs(est.mean - mass) / est.std_error)
        mono &= all(m2 < m1 + 1e-9 for m1, m2 in zip(masses, masses[1:]))
    elapsed = time.perf_counter() - t0
    ok = mono and worst_z < 3 and elapsed < 300
    report(7, ok, f"corridor mass decreasing in alpha={mono}; worst |sim - exact| = "
                  f"{worst_z:.2f} standard errors; {elapsed:.1f}s")
    assert mono and worst_z < 3 and elapsed < 300


def test_unregularized_gain_matches_enumeration(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        mdp = random_communicating_mdp(rng, max_states=4, max_actions=3)
        sol = solve_unregularized(mdp)
        best, _ = best_deterministic_gain(mdp)
        worst = max(worst, abs(sol.eta - best))
    report(8, worst < 1e-8, f"50 communicating MDPs: max |eta - enumerated gain| {worst:.1e}")
    assert worst < 1e-8


def test_ring_small_alpha(report):
    sol = minimize_dual(make_ring(5), 1e-3, 1.0)
    p_err = float(np.max(np.abs(sol.state_dist - 0.2)))
    pi_err = float(np.max(np.abs(sol.pi_star - 0.5)))
    ok = p_err <= 1e-3 and pi_err <= 1e-3
    report(9, ok, f"ring(5) at alpha=1e-3: max |p(s) - 0.2| {p_err:.1e}, max |pi - 0.5| {pi_err:.1e}")
    assert ok


def test_uniqueness_from_random_starts(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        mdp = random_mdp(rng, max_states=6, max_actions=4)
        a, b = log_uniform(rng, 0.1, 10), log_uniform(rng, 0.1, 10)
        s1 = minimize_dual(mdp, a, b, v0=rng.normal(scale=5, size=mdp.num_states))
        s2 = minimize_dual(mdp, a, b, v0=rng.normal(scale=5, size=mdp.num_states))
        worst = max(worst, total_variation(s1.p_star, s2.p_star))
    report(10, worst < 1e-6, f"100 MDPs, two random starts: max occupancy TV {worst:.1e}")
    assert worst < 1e-6
