"""Room and corridor: trading action entropy for state entropy.

A 3x3 room has up to nine moves per cell, the corridor only three. With
alpha * beta fixed at 10, raising alpha makes the agent favour the room
centre, where it has the most options; raising beta spreads it evenly over
all cells, corridor included. Each point is checked against a simulated
trajectory.
"""
import numpy as np

from occumax.dual import minimize_dual
from occumax.environments import make_gridworld
from occumax.simulator import HEATMAP_SENTINEL, corridor_fraction, occupancy_heatmap, sample_trajectory

CORRIDOR = 5
STEPS = 25000

mdp, spec = make_gridworld(CORRIDOR)
corridor = list(spec.corridor_states)

print(f"{'alpha':>5} {'beta':>6} {'exact':>7} {'simulated':>10} {'+-':>6}")
for i, a in enumerate(range(1, 11)):
    b = 10.0 / a
    sol = minimize_dual(mdp, float(a), b)
    est = corridor_fraction(sample_trajectory(mdp, sol.pi_star, STEPS, seed=i), spec)
    print(f"{a:5d} {b:6.2f} {sol.state_dist[corridor].sum():7.4f} {est.mean:10.4f} {est.std_error:6.4f}")


def show(heat):
    for row in heat:
        print("  " + " ".join("  .  " if x == HEATMAP_SENTINEL else f"{x:5.3f}" for x in row))


for a, b in [(10, 1), (1, 10)]:
    print(f"\noccupancy at alpha={a}, beta={b}")
    show(occupancy_heatmap(minimize_dual(mdp, a, b).p_star, spec))
