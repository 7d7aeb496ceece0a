"""How the outer/inner toy MDP responds to the two entropy weights.

The toy has two outer states that can hop to each other or to any of n
inner states; inner states can only go back out. Weighting action entropy
(alpha) rewards the outer states for their many choices, weighting state
entropy (beta) pushes mass towards the n inner states.
"""
from occumax.dual import minimize_dual
from occumax.environments import make_toy, toy_closed_form
from occumax.limits import solve_alpha_zero, solve_beta_zero

N = 3
mdp = make_toy(N)

print(f"toy with {N} inner states; u = V(outer) - V(inner)\n")
print(f"{'alpha':>6} {'beta':>6} {'u (dual)':>10} {'u (closed)':>11} {'p(outer)':>9} {'p(inner)':>9}")
for a, b in [(0.1, 10), (0.5, 2), (1, 1), (2, 0.5), (10, 0.1)]:
    sol = minimize_dual(mdp, a, b)
    ref = toy_closed_form(N, a, b)
    u = sol.v_star[0] - sol.v_star[2]
    print(f"{a:6.1f} {b:6.1f} {u:10.6f} {ref.u:11.6f} {sol.state_dist[0]:9.5f} {sol.state_dist[2]:9.5f}")

print("\nat alpha == beta the occupancy is the closed form (n+1)/(2(2n+1)):",
      f"{(N + 1) / (2 * (2 * N + 1)):.5f}")

b0 = solve_beta_zero(mdp, 1.0)
a0 = solve_alpha_zero(mdp, 1.0)
print("\nboundary regimes")
print(f"  beta -> 0 : u = {b0.v_star[0] - b0.v_star[2]:.6f} "
      f"(closed form {toy_closed_form(N, 1, 0).u:.6f}), p(outer) = {b0.state_dist[0]:.5f}")
print(f"  alpha -> 0: u = {a0.v_star[0] - a0.v_star[2]:.6f} "
      f"(closed form {toy_closed_form(N, 0, 1).u:.6f}), p(outer) = {a0.state_dist[0]:.5f}")
# every inner visit is followed by an outer one, so uniform mass is out of reach
print(f"  alpha -> 0 outer states hold {a0.state_dist[:2].sum():.4f} of the mass, "
      f"the most even split the dynamics allow")
