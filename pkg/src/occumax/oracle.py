"""Brute-force checks that share no code path with the dual solver.

The primal maximum is found by scoring every policy on a grid over the
per-state simplices; gradients are checked by centered differences.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dual import dual_value
from .exceptions import TooLarge
from .mdp import Mdp, check_valid
from .primal import average_total_reward, cesaro_limit, state_transition_matrix

MAX_DOF = 6
INTERIOR_SHIFT = 1e-6
BATCH = 4096


@dataclass(eq=False)
class OracleResult:
    best_value: float
    best_policy: np.ndarray
    best_occupancy: np.ndarray
    grid_resolution: float
    evaluations: int


def simplex_grid(k: int, m: int) -> np.ndarray:
    """All points of the (k-1)-simplex with coordinates in {0, 1/m, ..., 1}."""
    if k == 1:
        return np.ones((1, 1))
    pts = []
    # stars and bars: choose k - 1 bar positions among m + k - 1 slots
    for bars in itertools.combinations(range(m + k - 1), k - 1):
        edges = (-1,) + bars + (m + k - 1,)
        pts.append([edges[i + 1] - edges[i] - 1 for i in range(k)])
    return np.asarray(pts, dtype=float) / m


def policy_dof(mdp: Mdp) -> int:
    return int((mdp.action_counts - 1).sum())


def _occupancies(mdp: Mdp, policies: np.ndarray) -> np.ndarray:
    kernel = state_transition_matrix(mdp, policies)
    mu = cesaro_limit(kernel, np.full(mdp.num_states, 1.0 / mdp.num_states))
    return policies * mu[..., mdp.pair_state]


def brute_force_primal(mdp: Mdp, alpha: float, beta: float, resolution: float = 0.02,
                       shift: float = INTERIOR_SHIFT) -> OracleResult:
    """Best average total reward over a grid of policies.

    Each state's policy ranges over its simplex with spacing ``resolution``
    (rounded to 1/m), mixed with the uniform policy at weight ``shift``. A
    policy is mapped to its stationary occupancy from a uniform start.
    """
    check_valid(mdp)
    if not 0 < resolution <= 0.5:
        raise ValueError("resolution must lie in (0, 0.5]")
    dof = policy_dof(mdp)
    if dof > MAX_DOF:
        raise TooLarge(f"{dof} policy degrees of freedom exceed the limit of {MAX_DOF}")
    m = max(1, int(round(1.0 / resolution)))
    grids = [simplex_grid(int(k), m) for k in mdp.action_counts]
    uniform = 1.0 / mdp.action_counts[mdp.pair_state]
    best = (-np.inf, None, None)
    count = 0
    combos = itertools.product(*(range(len(g)) for g in grids))
    while True:
        chunk = list(itertools.islice(combos, BATCH))
        if not chunk:
            break
        idx = np.asarray(chunk)
        pol = np.concatenate([g[idx[:, s]] for s, g in enumerate(grids)], axis=1)
        pol = (1.0 - shift) * pol + shift * uniform
        occ = _occupancies(mdp, pol)
        vals = average_total_reward(occ, mdp, alpha, beta)
        count += len(chunk)
        j = int(np.argmax(vals))
        if vals[j] > best[0]:
            best = (float(vals[j]), pol[j], occ[j])
    return OracleResult(best[0], best[1], best[2], 1.0 / m, count)


def finite_difference_gradient(v, mdp: Mdp, alpha: float, beta: float, eps: float = 1e-6) -> np.ndarray:
    """Centered differences of the dual value, one coordinate at a time."""
    if not 1e-9 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-9, 1e-3]")
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = eps
        out[i] = (dual_value(v + e, mdp, alpha, beta) - dual_value(v - e, mdp, alpha, beta)) / (2 * eps)
    return out


def deterministic_policies(mdp: Mdp):
    """Yield every deterministic policy as a flat 0/1 array."""
    for choice in itertools.product(*(range(int(k)) for k in mdp.action_counts)):
        pi = np.zeros(mdp.num_pairs)
        pi[mdp.offsets[:-1] + np.asarray(choice)] = 1.0
        yield pi


def best_deterministic_gain(mdp: Mdp, max_policies: int = 100_000) -> tuple[float, np.ndarray]:
    """Largest long-run average reward of any deterministic policy and start state.

    Each policy is scored from every start state, so policies with several
    recurrent classes are credited with their best class.
    """
    check_valid(mdp)
    total = int(np.prod(mdp.action_counts.astype(float)))
    if total > max_policies:
        raise TooLarge(f"{total} deterministic policies exceed the limit of {max_policies}")
    pols = np.asarray(list(deterministic_policies(mdp)))
    n = mdp.num_states
    kernel = state_transition_matrix(mdp, pols)
    starts = np.broadcast_to(np.eye(n), (len(pols), n, n))
    mu = cesaro_limit(np.broadcast_to(kernel[:, None], (len(pols), n, n, n)), starts)
    # reward per step from each start: sum_s mu(s) sum_a pi(a|s) r(s, a)
    r_state = mdp.state_sums(pols * mdp.rewards)
    gains = np.einsum("pij,pj->pi", mu, r_state).max(axis=1)
    j = int(np.argmax(gains))
    return float(gains[j]), pols[j]
