"""Boundary regimes of the entropy weights.

* beta -> 0: only action entropy; solved by relative soft value iteration.
* alpha -> 0: only state entropy; solved along a smoothing path of dual
  solves at alpha = eps * beta, extrapolated to eps = 0.
* alpha = beta = 0: the average-reward Bellman equation; relative value
  iteration.

The two value iterations use the aperiodicity transform
V <- (1 - tau) V + tau (T V - (T V)[ref]), which converges on periodic
chains where the plain iteration oscillates.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .dual import SolverConfig, advantage, minimize_dual, segment_logsumexp
from .exceptions import InvalidWeights, NonConvergence, NotCommunicating
from .mdp import Mdp, check_valid, reachability_check
from .primal import average_total_reward, occupancy_from_policy, state_transition_matrix

REGIMES = ("beta-zero", "alpha-zero", "unregularized")
EPS_LADDER = (1e-1, 1e-2, 1e-3)
DAMPING = 0.5
REFERENCE_STATE = 0


@dataclass(eq=False)
class LimitSolution:
    """Solution of a boundary regime.

    ``eta`` is the optimal average total reward. ``tie_sets[s]`` lists the
    maximizing actions of state s (deterministic regimes only);
    ``unique_policy`` is False when any of them has more than one entry.
    """

    regime: str
    v_star: np.ndarray
    eta: float
    p_star: np.ndarray
    pi_star: np.ndarray
    state_dist: np.ndarray
    unique_policy: bool
    smoothing_eps: float = 0.0
    tie_sets: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    periodic: bool = False
    extras: dict = field(default_factory=dict)


def _require_communicating(mdp: Mdp, what: str) -> None:
    if not reachability_check(mdp).communicating:
        raise NotCommunicating(
            f"{what} needs a communicating MDP (every state reachable from every other)"
        )


def _relative_iteration(mdp: Mdp, backup, config: SolverConfig, what: str):
    """Damped relative value iteration; returns (V, gain, sweeps)."""
    v = np.zeros(mdp.num_states)
    for it in range(1, config.max_iters + 1):
        tv = backup(v)
        target = tv - tv[REFERENCE_STATE]
        new = (1.0 - DAMPING) * v + DAMPING * target
        change = float(np.max(np.abs(new - v)))
        v = new
        if change < config.value_tol * max(1.0, float(np.max(np.abs(v)))):
            return v, float(backup(v)[REFERENCE_STATE] - v[REFERENCE_STATE]), it
    raise NonConvergence(f"{what}: relative value iteration did not settle in "
                         f"{config.max_iters} sweeps (last change {change:.3e})", result=v)


def _is_periodic(kernel: np.ndarray) -> bool:
    """True if the chain has a unit-modulus eigenvalue other than 1."""
    lam = np.linalg.eigvals(kernel)
    return bool(np.any((np.abs(lam) > 1 - 1e-9) & (np.abs(lam - 1) > 1e-6)))


def _argmax_policy(adv, mdp: Mdp, tol: float):
    """Deterministic policy (lowest index among ties) and per-state tie sets."""
    pi = np.zeros(mdp.num_pairs)
    ties = []
    for s, row in enumerate(mdp.split(adv)):
        best = np.flatnonzero(row >= row.max() - tol)
        ties.append(best.tolist())
        pi[mdp.offsets[s] + best[0]] = 1.0
    return pi, ties


def solve_beta_zero(mdp: Mdp, alpha: float, config: SolverConfig | None = None) -> LimitSolution:
    """Pure action entropy (beta -> 0) on a communicating MDP.

    Iterates V <- alpha LSE_a((r + P V) / alpha) relative to state 0. At the
    fixed point the soft value alpha LSE_a(A / alpha) equals the gain eta in
    every state. The optimal policy is softmax(A / alpha) and the occupancy
    is its stationary distribution.
    """
    if not alpha > 0:
        raise InvalidWeights(f"beta-zero limit needs alpha > 0, got {alpha}")
    check_valid(mdp)
    _require_communicating(mdp, "the beta -> 0 limit")
    config = config or SolverConfig()
    t = mdp.transition_matrix

    def backup(v):
        return alpha * segment_logsumexp((mdp.rewards + t @ v) / alpha, mdp)

    v, eta, it = _relative_iteration(mdp, backup, config, "beta-zero")
    adv = advantage(v, mdp)
    log_q = segment_logsumexp(adv / alpha, mdp)
    pi = np.exp(adv / alpha - log_q[mdp.pair_state])
    pi = pi / mdp.state_sums(pi)[mdp.pair_state]
    p = occupancy_from_policy(mdp, pi)
    soft = alpha * log_q
    return LimitSolution(
        regime="beta-zero", v_star=v, eta=eta, p_star=p, pi_star=pi,
        state_dist=mdp.state_sums(p), unique_policy=True, iterations=it,
        extras={"soft_value_spread": float(soft.max() - soft.min()),
                "r_check": float(average_total_reward(p, mdp, alpha, 0.0))},
    )


def state_entropy_dual(v, mdp: Mdp, beta: float) -> float:
    """beta log sum_s exp(max_a A_V(s, a) / beta), the alpha -> 0 dual."""
    adv = advantage(v, mdp)
    best = np.maximum.reduceat(adv, mdp.offsets[:-1])
    return beta * float(logsumexp(best / beta))


def solve_alpha_zero(mdp: Mdp, beta: float, config: SolverConfig | None = None,
                     ladder=EPS_LADDER) -> LimitSolution:
    """Pure state entropy (alpha -> 0) via smoothed dual solves.

    Solves the dual at alpha = eps * beta for each eps in ``ladder``
    (decreasing), warm-starting each from the previous V, and extrapolates
    the last two V linearly to eps = 0. The policy is the argmax of the
    extrapolated advantage, lowest action index among ties; actions within
    ``eps_min * beta`` of the best count as tied. ``p_star`` is the
    smallest-eps smoothed occupancy, which is the limit occupancy even when
    ties make the deterministic policy's own chain differ from it.
    """
    if not beta > 0:
        raise InvalidWeights(f"alpha-zero limit needs beta > 0, got {beta}")
    check_valid(mdp)
    config = config or SolverConfig()
    ladder = sorted((float(e) for e in ladder), reverse=True)
    if len(ladder) < 2 or ladder[-1] <= 0:
        raise ValueError("ladder needs at least two positive values")
    v = None
    sols = []
    for eps in ladder:
        sol = minimize_dual(mdp, eps * beta, beta, config, v0=v)
        if not sol.converged:
            raise NonConvergence(f"alpha-zero smoothing solve at eps={eps} did not converge",
                                 result=sol)
        sols.append(sol)
        v = sol.v_star
    e1, e2 = ladder[-2], ladder[-1]
    v1, v2 = sols[-2].v_star, sols[-1].v_star
    v0 = (e1 * v2 - e2 * v1) / (e1 - e2)
    adv = advantage(v0, mdp)
    pi, ties = _argmax_policy(adv, mdp, e2 * beta)
    last = sols[-1]
    tv = [0.5 * float(np.abs(a.p_star - b.p_star).sum()) for a, b in zip(sols, sols[1:])]
    return LimitSolution(
        regime="alpha-zero", v_star=v0, eta=state_entropy_dual(v0, mdp, beta),
        p_star=last.p_star, pi_star=pi, state_dist=last.state_dist,
        unique_policy=all(len(t) == 1 for t in ties), smoothing_eps=e2, tie_sets=ties,
        iterations=sum(s.iterations for s in sols),
        periodic=_is_periodic(state_transition_matrix(mdp, pi)),
        extras={"ladder": ladder, "ladder_tv": tv,
                "r_check": float(average_total_reward(last.p_star, mdp, 0.0, beta))},
    )


def solve_unregularized(mdp: Mdp, config: SolverConfig | None = None) -> LimitSolution:
    """Average-reward Bellman optimality, V(s) = max_a (r - eta + P V)(s, a).

    Relative value iteration from V = 0 with reference state 0; the policy
    is greedy with lowest-index tie-breaking.
    """
    check_valid(mdp)
    _require_communicating(mdp, "the unregularized solver")
    config = config or SolverConfig()
    t = mdp.transition_matrix

    def backup(v):
        return np.maximum.reduceat(mdp.rewards + t @ v, mdp.offsets[:-1])

    v, eta, it = _relative_iteration(mdp, backup, config, "unregularized")
    adv = advantage(v, mdp)
    scale = max(1.0, float(np.max(np.abs(v))), float(np.max(np.abs(mdp.rewards), initial=0.0)))
    pi, ties = _argmax_policy(adv, mdp, 1e-9 * scale)
    kernel = state_transition_matrix(mdp, pi)
    p = occupancy_from_policy(mdp, pi)
    resid = float(np.max(np.abs(backup(v) - eta - v)))
    return LimitSolution(
        regime="unregularized", v_star=v, eta=eta, p_star=p, pi_star=pi,
        state_dist=mdp.state_sums(p), unique_policy=all(len(t) == 1 for t in ties),
        tie_sets=ties, iterations=it, periodic=_is_periodic(kernel),
        extras={"bellman_residual": resid},
    )
