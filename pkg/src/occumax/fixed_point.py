"""Multiplicative fixed-point iteration for deterministic, reward-free MDPs.

Works with z_s = exp(V(s) / alpha). With C[s, s'] the number of actions of
s that lead to s', the per-state action sums are Q_s = (C z)_s / z_s and
the critical-point condition of the dual reads

    z_s = ((C z)_s^k / (C^T y)_s) ** (1 / (k + 1)),   y = Q^(k - 1) / z,

with k = alpha / beta. Iterating this map directly is unstable for
alpha > beta; multiplying both sides by z_s^((k - 1) / (k + 1)) first gives
a second map that is stable there. Both maps coincide at alpha == beta.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .dual import DualSolution, SolverConfig, _Projector, _check_weights, extract_solution
from .exceptions import DeterminismViolation, NonConvergence, NonzeroReward
from .mdp import Mdp, absorbing_mask, check_valid

# Any z above this is reported as divergence.
Z_LIMIT = 1e150


@dataclass(frozen=True, eq=False)
class FixedPointState:
    """One iterate: z per state and the action sums Q computed from it."""

    z: np.ndarray
    q: np.ndarray


def _require_deterministic_zero_reward(mdp: Mdp) -> None:
    check_valid(mdp)
    live = mdp.trans_prob > 0
    per_pair = np.bincount(mdp.trans_pair[live], minlength=mdp.num_pairs)
    bad = np.flatnonzero(per_pair != 1)
    if bad.size:
        s = int(mdp.pair_state[bad[0]])
        raise DeterminismViolation(
            f"fixed-point iteration needs deterministic transitions; "
            f"(s={s}, a={int(bad[0] - mdp.offsets[s])}) has {int(per_pair[bad[0]])} successors"
        )
    nz = np.flatnonzero(mdp.rewards != 0)
    if nz.size:
        s = int(mdp.pair_state[nz[0]])
        raise NonzeroReward(
            f"fixed-point iteration needs r == 0; r(s={s}, a={int(nz[0] - mdp.offsets[s])}) "
            f"= {mdp.rewards[nz[0]]!r}"
        )


def successor_counts(mdp: Mdp) -> sparse.csr_matrix:
    """C[s, s'] = number of actions of s leading to s' (deterministic MDPs)."""
    live = mdp.trans_prob > 0
    src = mdp.pair_state[mdp.trans_pair[live]]
    dst = mdp.trans_next[live]
    n = mdp.num_states
    return sparse.csr_matrix((np.ones(src.size), (src, dst)), shape=(n, n))


def scheme_for(alpha: float, beta: float) -> str:
    return "scheme1" if alpha <= beta else "scheme2"


def action_sums(z, counts) -> np.ndarray:
    """Q_s = (C z)_s / z_s, taken as 0 where z_s = 0."""
    live = z > 0
    return np.where(live, (counts @ z) / np.where(live, z, 1.0), 0.0)


def _sweep(z, counts, kappa, scheme):
    """One synchronous update; returns (new z, Q at the old z)."""
    n_in = counts @ z
    live = z > 0
    q = action_sums(z, counts)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(live, q ** (kappa - 1.0) / np.where(live, z, 1.0), 0.0)
        d = counts.T @ y
        if scheme == "scheme1":
            new = (n_in**kappa / d) ** (1.0 / (kappa + 1.0))
        else:
            new = (z ** (kappa - 1.0) * n_in**kappa / d) ** (1.0 / (2.0 * kappa))
    new = np.where(live, new, 0.0)
    return new, q


def iterate_z(z, mdp: Mdp, alpha: float, beta: float, scheme: str | None = None) -> FixedPointState:
    """One sweep of the fixed-point map.

    ``scheme`` defaults to ``scheme1`` for alpha <= beta and ``scheme2``
    otherwise. Zero entries stay exactly zero.
    """
    _check_weights(alpha, beta)
    _require_deterministic_zero_reward(mdp)
    z = np.asarray(z, dtype=float)
    if z.shape != (mdp.num_states,):
        raise ValueError(f"z has shape {z.shape}, expected ({mdp.num_states},)")
    if np.any(z < 0):
        raise ValueError("z must be non-negative")
    counts = successor_counts(mdp)
    new, _ = _sweep(z, counts, alpha / beta, scheme or scheme_for(alpha, beta))
    return FixedPointState(new, action_sums(new, counts))


def solve_fixed_point(mdp: Mdp, alpha: float, beta: float, config: SolverConfig | None = None,
                      trace: list | None = None) -> DualSolution:
    """Iterate the fixed-point map from z = 1 (z = 0 on absorbing states).

    Stops when the relative sup-norm change of z falls below
    ``config.value_tol`` or after ``config.max_iters`` sweeps. z is rescaled
    to max 1 after each sweep, which leaves both maps unchanged because they
    are homogeneous of degree one. V = alpha log z, with zero entries put on
    the clamp floor, is then passed to :func:`extract_solution`.

    If ``trace`` is a list, every iterate of z is appended to it.
    Raises :class:`NonConvergence` if z diverges or never settles.
    """
    _check_weights(alpha, beta)
    _require_deterministic_zero_reward(mdp)
    config = config or SolverConfig()
    counts = successor_counts(mdp)
    kappa = alpha / beta
    scheme = scheme_for(alpha, beta)
    z = np.where(absorbing_mask(mdp), 0.0, 1.0)
    if trace is not None:
        trace.append(z.copy())
    change = np.inf
    it = 0
    while it < config.max_iters:
        it += 1
        new, _ = _sweep(z, counts, kappa, scheme)
        top = new.max()
        if not np.isfinite(top) or top > Z_LIMIT or top <= 0:
            raise NonConvergence(
                f"fixed-point {scheme} diverged after {it} sweeps", result=z
            )
        new = new / top
        live = new > 0
        change = float(np.max(np.abs(new - z)[live] / np.maximum(z[live], 1e-300), initial=0.0))
        z = new
        if trace is not None:
            trace.append(z.copy())
        if change < config.value_tol:
            break
    converged = change < config.value_tol
    sol = _solution_from_z(z, mdp, alpha, beta, config, it, converged)
    sol.extras.update(scheme=scheme, z_final=z, z_change=change)
    if not converged:
        raise NonConvergence(
            f"fixed-point {scheme} did not settle in {it} sweeps (change {change:.3e})", result=sol
        )
    return sol


def _solution_from_z(z, mdp, alpha, beta, config, iterations, converged) -> DualSolution:
    proj = _Projector(mdp, config.clamp_width(mdp, alpha, beta), config.gauge)
    live = z > 0
    v = np.full(mdp.num_states, -np.inf)
    v[live] = alpha * np.log(z[live])
    top = v[live].max()
    v = np.where(live, v, top - proj.width)
    return extract_solution(proj(v), mdp, alpha, beta, config, iterations=iterations,
                            converged=converged)
