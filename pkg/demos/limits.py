"""Boundary regimes and what regularization buys on a ring.

On a ring every state has two moves, left and right. Without action
entropy (alpha -> 0) any deterministic walk around the ring already
spreads mass uniformly, so the optimal policy is not unique and the chain
is periodic. A small alpha picks the symmetric random walk.
"""
import numpy as np

from occumax.dual import minimize_dual
from occumax.environments import make_ring
from occumax.limits import solve_alpha_zero, solve_unregularized
from occumax.mdp import Mdp

ring = make_ring(5)
a0 = solve_alpha_zero(ring, 1.0)
print("alpha -> 0 on a 5-ring")
print(f"  state distribution {np.round(a0.state_dist, 4)}")
print(f"  unique policy: {a0.unique_policy}, periodic: {a0.periodic}, ties per state: {a0.tie_sets[0]}")

for alpha in (1e-1, 1e-2, 1e-3):
    sol = minimize_dual(ring, alpha, 1.0)
    print(f"  alpha={alpha:g}: policy of state 0 = {np.round(sol.pi_star[:2], 6)}")

# two self-loops and a swap; rewards decide which loop wins without entropy
m = Mdp.from_lists([[[(0, 1.0)], [(1, 1.0)]], [[(1, 1.0)], [(0, 1.0)]]], [[0.2, 0.0], [0.9, 0.0]])
un = solve_unregularized(m)
print(f"\nunregularized gain {un.eta:.3f} with policy {un.pi_star}")
for w in (1.0, 0.1, 0.01):
    sol = minimize_dual(m, w, w)
    print(f"  alpha = beta = {w:<5}: R_max = {sol.r_max:.4f}, p(state 1) = {sol.state_dist[1]:.4f}")
