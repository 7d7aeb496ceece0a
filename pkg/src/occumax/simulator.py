"""Trajectory sampling and interval statistics.

Randomness comes from numpy's PCG64 bit generator seeded with the given
64-bit integer. The initial state (when not given) is drawn first, then
one block of ``2 * (burn_in + steps)`` uniforms drives the whole run: two
per step, the first choosing the action and the second the successor.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .environments import GridSpec, make_gridworld
from .exceptions import DimensionMismatch
from .mdp import Mdp

RNG_ALGORITHM = "numpy.random.PCG64"
POLICY_SUM_TOL = 1e-8


@dataclass(eq=False)
class TrajectoryStats:
    """Visit counts of one simulated run.

    ``states`` holds the state at every counted step, so interval measures
    can be computed afterwards.
    """

    visit_counts: np.ndarray
    state_counts: np.ndarray
    steps: int
    seed: int
    states: np.ndarray
    init_state: int
    burn_in: int = 0
    rng: str = RNG_ALGORITHM

    def empirical_state_dist(self) -> np.ndarray:
        return self.state_counts / self.steps


@dataclass(frozen=True)
class IntervalEstimate:
    """Mean over equal intervals with the naive standard error std / sqrt(k).

    Autocorrelation between intervals is ignored.
    """

    mean: float
    std_error: float
    per_interval: np.ndarray = field(repr=False)


def _cumulative_rows(weights, mdp: Mdp):
    rows = []
    for row in mdp.split(weights):
        c = np.cumsum(row)
        rows.append((c / c[-1]).tolist())
    return rows


def sample_trajectory(mdp: Mdp, policy, steps: int, seed: int, init_state: int | None = None,
                      burn_in: int = 0) -> TrajectoryStats:
    """Run the chain induced by ``policy`` for ``burn_in + steps`` steps.

    Only the last ``steps`` steps are counted. ``init_state`` defaults to a
    uniform draw.
    """
    steps, burn_in = int(steps), int(burn_in)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    pi = np.asarray(policy, dtype=float)
    if pi.shape != (mdp.num_pairs,):
        raise DimensionMismatch(f"policy has shape {pi.shape}, expected ({mdp.num_pairs},)")
    if np.any(pi < 0):
        raise ValueError("policy has negative entries")
    bad = np.flatnonzero(np.abs(mdp.state_sums(pi) - 1.0) > POLICY_SUM_TOL)
    if bad.size:
        raise ValueError(f"policy rows do not sum to 1 at states {bad.tolist()}")

    rng = np.random.Generator(np.random.PCG64(seed))
    if init_state is None:
        init_state = int(rng.integers(mdp.num_states))
    elif not 0 <= init_state < mdp.num_states:
        raise ValueError(f"init_state {init_state} out of range")
    act_cum = _cumulative_rows(pi, mdp)
    offsets = mdp.offsets.tolist()
    succ_next, succ_cum = [], []
    for k in range(mdp.num_pairs):
        idx = np.flatnonzero(mdp.trans_pair == k)
        succ_next.append(mdp.trans_next[idx].tolist())
        c = np.cumsum(mdp.trans_prob[idx])
        succ_cum.append((c / c[-1]).tolist())

    total = burn_in + steps
    u = rng.random(2 * total).tolist()
    pairs = np.empty(total, dtype=np.int64)
    states = np.empty(total, dtype=np.int64)
    s = init_state
    for t in range(total):
        row = act_cum[s]
        a = min(bisect_right(row, u[2 * t]), len(row) - 1)
        k = offsets[s] + a
        states[t] = s
        pairs[t] = k
        nxt = succ_next[k]
        if len(nxt) == 1:
            s = nxt[0]
        else:
            cum = succ_cum[k]
            s = nxt[min(bisect_right(cum, u[2 * t + 1]), len(nxt) - 1)]
    pairs, states = pairs[burn_in:], states[burn_in:]
    return TrajectoryStats(
        visit_counts=np.bincount(pairs, minlength=mdp.num_pairs),
        state_counts=np.bincount(states, minlength=mdp.num_states),
        steps=steps, seed=int(seed), states=states, init_state=int(init_state), burn_in=burn_in,
    )


def interval_fraction(stats: TrajectoryStats, members, num_intervals: int) -> IntervalEstimate:
    """Fraction of steps spent in ``members``, per interval of equal length."""
    num_intervals = int(num_intervals)
    if num_intervals < 2:
        raise ValueError("need at least two intervals for a standard error")
    if stats.steps % num_intervals:
        raise ValueError(f"{stats.steps} steps do not split into {num_intervals} equal intervals")
    hit = np.isin(stats.states, np.asarray(list(members), dtype=np.int64))
    per = hit.reshape(num_intervals, -1).mean(axis=1)
    return IntervalEstimate(float(per.mean()), float(per.std(ddof=1) / np.sqrt(num_intervals)), per)


def corridor_fraction(stats: TrajectoryStats, grid: GridSpec, num_intervals: int = 10) -> IntervalEstimate:
    """Fraction of time in corridor cells, mean and standard error over intervals."""
    if stats.state_counts.shape != (grid.num_states,):
        raise DimensionMismatch(
            f"trajectory has {stats.state_counts.shape[0]} states, grid has {grid.num_states}"
        )
    return interval_fraction(stats, grid.corridor_states, num_intervals)


HEATMAP_SENTINEL = -1.0


def occupancy_heatmap(source, grid: GridSpec) -> np.ndarray:
    """State mass laid out on the arena, normalized over cells; -1 off the arena.

    ``source`` is a :class:`TrajectoryStats`, a per-state array, or a
    per-(s, a) occupancy of the matching grid world.
    """
    if isinstance(source, TrajectoryStats):
        mass = source.state_counts.astype(float)
    else:
        x = np.asarray(source, dtype=float)
        if x.shape == (grid.num_states,):
            mass = x
        else:
            mdp, _ = make_gridworld(grid.corridor_len)
            if x.shape != (mdp.num_pairs,):
                raise DimensionMismatch(
                    f"source has shape {x.shape}; expected ({grid.num_states},) or ({mdp.num_pairs},)"
                )
            mass = mdp.state_sums(x)
    if mass.shape != (grid.num_states,):
        raise DimensionMismatch(f"source covers {mass.shape[0]} states, grid has {grid.num_states}")
    total = mass.sum()
    if not total > 0:
        raise ValueError("source carries no mass")
    out = np.full(grid.shape, HEATMAP_SENTINEL)
    rows, cols = zip(*grid.cells)
    out[list(rows), list(cols)] = mass / total
    return out
