"""Primal side: average total reward over occupancies, stationary
distributions, and conversions between policies and occupancies."""
from __future__ import annotations

import numpy as np
from scipy.special import xlogy

from .exceptions import DimensionMismatch, InvalidWeights, NonConvergence
from .mdp import Mdp

SUPPORT_EPS = 1e-14
POLICY_TOL = 1e-10


def _check_weights(alpha, beta):
    if alpha < 0 or beta < 0:
        raise InvalidWeights(f"alpha and beta must be >= 0, got ({alpha}, {beta})")


def _check_pairs(x, mdp: Mdp, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (mdp.num_pairs,):
        raise DimensionMismatch(f"{what} has trailing size {x.shape[-1:]}, expected {mdp.num_pairs}")
    return x


def average_total_reward(p, mdp: Mdp, alpha: float, beta: float):
    """Entropy-regularized average reward of a joint occupancy ``p``.

    R = sum p r - alpha sum p log p - (beta - alpha) sum_s p(s) log p(s),
    with 0 log 0 = 0. ``p`` may carry leading batch axes.
    """
    _check_weights(alpha, beta)
    p = _check_pairs(p, mdp, "occupancy")
    ps = mdp.state_sums(p)
    value = p @ mdp.rewards
    value = value - alpha * xlogy(p, p).sum(axis=-1)
    value = value - (beta - alpha) * xlogy(ps, ps).sum(axis=-1)
    return value


def directional_second_derivative(p, u, mdp: Mdp, alpha: float, beta: float) -> float:
    """Second derivative of the average reward at interior ``p`` along ``u``."""
    p = _check_pairs(p, mdp, "occupancy")
    u = _check_pairs(u, mdp, "direction")
    if np.any(p <= 0):
        raise ValueError("p must be strictly positive (interior of the simplex)")
    if abs(u.sum()) > 1e-12 * max(1.0, np.abs(u).sum()):
        raise ValueError("direction must sum to zero")
    ps = mdp.state_sums(p)
    us = mdp.state_sums(u)
    action_term = mdp.state_sums(u * u / p) - us**2 / ps
    state_term = us**2 / ps
    return float(-alpha * action_term.sum() - beta * state_term.sum())


def check_policy(policy, mdp: Mdp, tol: float = POLICY_TOL) -> np.ndarray:
    pi = _check_pairs(policy, mdp, "policy")
    if np.any(pi < 0):
        raise ValueError("policy has negative entries")
    bad = np.flatnonzero(np.abs(mdp.state_sums(pi) - 1.0) > tol)
    if bad.size:
        raise ValueError(f"policy rows do not sum to 1 at states {bad.tolist()}")
    return pi


def state_transition_matrix(mdp: Mdp, policy) -> np.ndarray:
    """Dense state-to-state kernel under ``policy``; batch axes allowed."""
    pi = np.asarray(policy, dtype=float)
    weighted = pi[..., :, None] * mdp.dense_transitions
    return np.add.reduceat(weighted, mdp.offsets[:-1], axis=-2)


def cesaro_limit(kernel, init, tol: float = 1e-12, max_squarings: int = 64):
    """Long-run time-average of ``init @ kernel**t``.

    Runs power iteration on the lazy chain (I + kernel) / 2, whose iterates are
    binomially weighted averages of the original iterates. The lazy chain
    has no eigenvalues of modulus one other than 1, so this converges to the
    Cesaro limit for periodic chains too. Powers are formed by repeated
    squaring, so 2**k steps cost k matrix products.
    """
    kernel = np.asarray(kernel, dtype=float)
    n = kernel.shape[-1]
    lazy = 0.5 * (kernel + np.eye(n))
    init = np.broadcast_to(np.asarray(init, dtype=float), kernel.shape[:-2] + (n,))
    power = lazy
    for _ in range(max_squarings + 1):
        mu = np.einsum("...i,...ij->...j", init, power)
        resid = np.abs(np.einsum("...i,...ij->...j", mu, kernel) - mu).sum(axis=-1)
        if np.all(resid < tol):
            mu = np.clip(mu, 0.0, None)
            return mu / mu.sum(axis=-1, keepdims=True)
        power = power @ power
    raise NonConvergence(
        f"stationary distribution did not converge (flow residual {np.max(resid):.3e})",
        result=mu,
    )


def stationary_distribution(mdp: Mdp, policy, init=None, tol: float = 1e-12) -> np.ndarray:
    """Time-averaged state distribution of the chain induced by ``policy``.

    ``init`` defaults to uniform; it only matters when the chain has more
    than one recurrent class.
    """
    pi = check_policy(policy, mdp)
    n = mdp.num_states
    if init is None:
        init = np.full(n, 1.0 / n)
    init = np.asarray(init, dtype=float)
    if init.shape != (n,):
        raise DimensionMismatch(f"init has shape {init.shape}, expected ({n},)")
    return cesaro_limit(state_transition_matrix(mdp, pi), init, tol=tol)


def occupancy_from_policy(mdp: Mdp, policy, init=None) -> np.ndarray:
    """Joint occupancy p(s, a) = pi(a|s) p(s)."""
    pi = check_policy(policy, mdp)
    mu = stationary_distribution(mdp, pi, init)
    return pi * mu[mdp.pair_state]


def policy_from_joint(p, mdp: Mdp) -> np.ndarray:
    """Condition a joint occupancy on the state.

    States carrying at most ``SUPPORT_EPS`` mass get a uniform row.
    """
    p = _check_pairs(p, mdp, "occupancy")
    ps = mdp.state_sums(p)
    live = ps > SUPPORT_EPS
    denom = np.where(live, ps, 1.0)[mdp.pair_state]
    uniform = 1.0 / mdp.action_counts[mdp.pair_state]
    return np.where(live[mdp.pair_state], p / denom, uniform)


def flow_residual(p, mdp: Mdp) -> float:
    """max_s | inflow(s) - p(s) | for a joint occupancy."""
    p = _check_pairs(p, mdp, "occupancy")
    inflow = mdp.transition_matrix.T @ p
    return float(np.max(np.abs(inflow - mdp.state_sums(p))))


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
