"""Two routes to the same optimum on reward-free deterministic MDPs.

The multiplicative fixed-point map works on z = exp(V / alpha) and needs
no step sizes. Its first form is stable for alpha <= beta and the second
for alpha > beta; here both solvers are run side by side.
"""
import time

from occumax.dual import minimize_dual
from occumax.environments import make_gridworld, make_ring, make_toy
from occumax.fixed_point import solve_fixed_point
from occumax.primal import total_variation

cases = [("toy n=3", make_toy(3)), ("ring n=6", make_ring(6)),
         ("grid N=5", make_gridworld(5)[0]), ("grid N=9", make_gridworld(9)[0])]

print(f"{'mdp':<9} {'alpha':>5} {'beta':>5} {'scheme':>8} {'sweeps':>7} {'GD steps':>9} {'TV':>9} "
      f"{'fp ms':>6} {'gd ms':>6}")
for name, mdp in cases:
    for a, b in [(1, 10), (1, 1), (10, 1)]:
        t0 = time.perf_counter()
        fp = solve_fixed_point(mdp, a, b)
        t1 = time.perf_counter()
        du = minimize_dual(mdp, a, b)
        t2 = time.perf_counter()
        print(f"{name:<9} {a:5} {b:5} {fp.extras['scheme']:>8} {fp.iterations:7d} {du.iterations:9d} "
              f"{total_variation(fp.p_star, du.p_star):9.1e} {1e3 * (t1 - t0):6.1f} {1e3 * (t2 - t1):6.1f}")
