"""Dual function beta log Z_V, its gradient, and the unconstrained minimizer.

For alpha, beta > 0 the optimal occupancy is a closed-form function of the
per-state multipliers V; the multipliers minimize the convex dual

    L(V) = beta * log sum_s exp((alpha / beta) * log sum_a exp(A_V(s, a) / alpha))

with A_V(s, a) = r(s, a) + sum_s' p(s'|s, a) V(s') - V(s). Everything below
is evaluated with nested log-sum-exp so no intermediate overflows.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .exceptions import InvalidWeights
from .mdp import Mdp, check_valid, reachability_check
from .primal import average_total_reward, flow_residual

GAUGES = ("mean", "reference")
# Accepted steps over which value_tol measures the relative decrease.
STALL_WINDOW = 1000


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and line-search constants.

    ``v_clamp`` is the width below the per-component maximum of V at which
    multipliers are floored. ``None`` picks
    ``num_states * (40 * max(alpha, beta) / p_min + reward_span)`` where
    ``p_min`` is the smallest positive transition probability; mass leaking
    along a chain of states compounds, hence the factor num_states. ``gap_tol``
    bounds |beta log Z - R(p)| = |V . grad| at termination.
    """

    grad_tol: float = 1e-8
    gap_tol: float = 1e-9
    value_tol: float = 1e-12
    max_iters: int = 100_000
    initial_step: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    v_clamp: float | None = None
    gauge: str = "mean"

    def __post_init__(self):
        for name in ("grad_tol", "gap_tol", "value_tol", "initial_step", "armijo_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.v_clamp is not None and not self.v_clamp > 0:
            raise ValueError("v_clamp must be positive")
        if self.gauge not in GAUGES:
            raise ValueError(f"gauge must be one of {GAUGES}")

    def clamp_width(self, mdp: Mdp, alpha: float, beta: float) -> float:
        if self.v_clamp is not None:
            return self.v_clamp
        r = mdp.rewards
        span = float(r.max() - r.min()) if r.size else 0.0
        pos = mdp.trans_prob[mdp.trans_prob > 0]
        p_min = float(pos.min()) if pos.size else 1.0
        return mdp.num_states * (40.0 * max(alpha, beta) / p_min + span)


@dataclass(eq=False)
class DualSolution:
    """Optimal multipliers and everything derived from them.

    Per-(s, a) arrays are flat in the MDP's pair order; see :meth:`Mdp.split`.
    """

    v_star: np.ndarray
    p_star: np.ndarray
    pi_star: np.ndarray
    state_dist: np.ndarray
    r_max: float
    lam: float
    grad_norm: float
    duality_gap: float
    flow_residual: float
    iterations: int
    converged: bool
    alpha: float
    beta: float
    gauge: str = "mean"
    clamped_states: list = field(default_factory=list)
    communicating: bool = True
    extras: dict = field(default_factory=dict)


def _check_weights(alpha, beta):
    if not (alpha > 0 and beta > 0):
        raise InvalidWeights(
            f"the dual solver needs alpha > 0 and beta > 0, got ({alpha}, {beta}); "
            "use the limit solvers for boundary cases"
        )


def segment_logsumexp(x, mdp: Mdp) -> np.ndarray:
    """log sum_a exp(x[s, a]) for every state."""
    x = np.asarray(x, dtype=float)
    starts = mdp.offsets[:-1]
    top = np.maximum.reduceat(x, starts)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return top + np.log(np.add.reduceat(np.exp(x - top[mdp.pair_state]), starts))


def _differential(v, mdp: Mdp) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return mdp.transition_matrix @ v - v[mdp.pair_state]


def advantage(v, mdp: Mdp) -> np.ndarray:
    """A_V(s, a) = r(s, a) + E[V(s') | s, a] - V(s), flat over pairs."""
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.num_states,):
        raise ValueError(f"V has shape {v.shape}, expected ({mdp.num_states},)")
    return mdp.rewards + _differential(v, mdp)


def _terms(v, mdp: Mdp, alpha: float, beta: float):
    adv = advantage(v, mdp)
    log_q = segment_logsumexp(adv / alpha, mdp)
    scaled = (alpha / beta) * log_q
    log_z = float(logsumexp(scaled))
    log_ps = scaled - log_z
    log_pi = adv / alpha - log_q[mdp.pair_state]
    log_p = log_pi + log_ps[mdp.pair_state]
    return adv, log_q, log_z, log_ps, log_pi, log_p


def dual_value(v, mdp: Mdp, alpha: float, beta: float) -> float:
    """beta * log Z_V."""
    _check_weights(alpha, beta)
    return beta * _terms(v, mdp, alpha, beta)[2]


def joint_from_values(v, mdp: Mdp, alpha: float, beta: float) -> np.ndarray:
    """p_V(s, a) = Z^-1 (sum_b e^{A(s,b)/alpha})^(alpha/beta - 1) e^{A(s,a)/alpha}."""
    _check_weights(alpha, beta)
    return np.exp(_terms(v, mdp, alpha, beta)[5])


def _gradient_from_log_p(log_p, log_ps, mdp: Mdp) -> np.ndarray:
    return mdp.transition_matrix.T @ np.exp(log_p) - np.exp(log_ps)


def dual_gradient(v, mdp: Mdp, alpha: float, beta: float) -> np.ndarray:
    """Gradient of beta log Z_V: inflow(s) - p_V(s)."""
    _check_weights(alpha, beta)
    t = _terms(v, mdp, alpha, beta)
    return _gradient_from_log_p(t[5], t[3], mdp)


def _dual_change(terms, dv, mdp: Mdp, alpha: float, beta: float) -> float:
    """L(V + dv) - L(V) evaluated without cancellation.

    Writes the ratio Z_{V+dv} / Z_V as nested expectations of
    exp(dA / alpha) under the current policy and state distribution, so that
    decreases far below the rounding level of L itself stay measurable.
    """
    adv, log_q, log_z, log_ps, log_pi, _ = terms
    da = _differential(dv, mdp) / alpha
    # The expansion only helps for small changes; large ones are safe to
    # evaluate directly.
    if np.max(np.abs(da)) <= 30.0:
        inner = np.add.reduceat(np.exp(log_pi) * np.expm1(da), mdp.offsets[:-1])
        if np.min(inner) > -0.5:
            expo = (alpha / beta) * np.log1p(inner)
            if np.max(expo) <= 30.0:
                total = float(np.exp(log_ps) @ np.expm1(expo))
                if total > -0.5:
                    return beta * float(np.log1p(total))
    return beta * (_terms_from_adv(adv + alpha * da, mdp, alpha, beta) - log_z)


def _terms_from_adv(adv, mdp, alpha, beta) -> float:
    log_q = segment_logsumexp(adv / alpha, mdp)
    return float(logsumexp((alpha / beta) * log_q))


class _Projector:
    """Clamp then gauge-fix V on each weakly connected component.

    Constant shifts of V on a weakly connected component leave every
    advantage unchanged, so gauge fixing never alters the dual.
    """

    def __init__(self, mdp: Mdp, width: float, gauge: str):
        labels = mdp.weak_components
        self.groups = [np.flatnonzero(labels == c) for c in range(labels.max() + 1)]
        self.width = width
        self.gauge = gauge

    def __call__(self, v):
        v = np.array(v, dtype=float)
        for idx in self.groups:
            block = v[idx]
            block = np.maximum(block, block.max() - self.width)
            if self.gauge == "mean":
                block = block - block.mean()
            else:
                block = block - block[0]
            v[idx] = block
        return v

    def blocked(self, v, g) -> np.ndarray:
        """Coordinates sitting on the floor whose descent direction points below it."""
        mask = np.zeros(v.shape, dtype=bool)
        for idx in self.groups:
            block = v[idx]
            mask[idx] = (block <= block.max() - self.width * (1 - 1e-12)) & (g[idx] > 0)
        return mask

    def clamped(self, v) -> list[int]:
        out = []
        for idx in self.groups:
            block = v[idx]
            hit = block <= block.max() - self.width * (1 - 1e-12)
            out.extend(idx[hit].tolist())
        return sorted(out)


def extract_solution(v_star, mdp: Mdp, alpha: float, beta: float,
                     config: SolverConfig | None = None, *, iterations: int = 0,
                     converged: bool | None = None) -> DualSolution:
    """Optimal policy, occupancies, R_max and lambda at multipliers ``v_star``.

    Any V is accepted; away from the optimum the result is a diagnostic with
    a nonzero flow residual.
    """
    _check_weights(alpha, beta)
    config = config or SolverConfig()
    v = np.asarray(v_star, dtype=float)
    adv, log_q, log_z, log_ps, log_pi, log_p = _terms(v, mdp, alpha, beta)
    p = np.exp(log_p)
    grad = _gradient_from_log_p(log_p, log_ps, mdp)
    grad_norm = float(np.max(np.abs(grad)))
    r_max = beta * log_z
    gap = abs(r_max - float(average_total_reward(p, mdp, alpha, beta)))
    proj = _Projector(mdp, config.clamp_width(mdp, alpha, beta), config.gauge)
    if converged is None:
        converged = _stationary(v, grad, proj, config)
    return DualSolution(
        v_star=v,
        p_star=p,
        pi_star=np.exp(log_pi),
        state_dist=np.exp(log_ps),
        r_max=r_max,
        lam=beta * (1.0 - log_z),
        grad_norm=grad_norm,
        duality_gap=gap,
        flow_residual=flow_residual(p, mdp),
        iterations=iterations,
        converged=bool(converged),
        alpha=float(alpha),
        beta=float(beta),
        gauge=config.gauge,
        clamped_states=proj.clamped(v),
        communicating=reachability_check(mdp).communicating,
    )


def minimize_dual(mdp: Mdp, alpha: float, beta: float, config: SolverConfig | None = None,
                  v0=None, trace: list | None = None) -> DualSolution:
    """Minimize the dual by gradient descent with Armijo backtracking.

    Starts from ``v0`` (default zeros). The descent direction is the
    gradient scaled per state by ``_diag_scale``. The first trial step of
    every line search is a Barzilai-Borwein estimate in that metric
    (alternating the long and short variants), falling back to
    ``initial_step``; Armijo backtracking then guarantees monotone descent.
    After every accepted step V is clamped and re-gauged per weakly
    connected component.

    Stops when the sup-norm of the gradient (ignoring floored coordinates
    pushing further down) drops below ``grad_tol`` and the duality gap below
    ``gap_tol``, when the relative decrease of the dual accumulated over the last
    ``STALL_WINDOW`` steps drops below ``value_tol``, or after ``max_iters``
    steps. Only the gradient rule sets ``converged=True``.

    If ``trace`` is a list, the dual value after each accepted step is
    appended to it.
    """
    _check_weights(alpha, beta)
    check_valid(mdp)
    config = config or SolverConfig()
    proj = _Projector(mdp, config.clamp_width(mdp, alpha, beta), config.gauge)
    v = proj(np.zeros(mdp.num_states) if v0 is None else v0)
    terms = _terms(v, mdp, alpha, beta)
    f = beta * terms[2]
    g = _gradient_from_log_p(terms[5], terms[3], mdp)
    if trace is not None:
        trace.append(f)
    scale = _diag_scale(terms, mdp, alpha, beta)
    step = config.initial_step
    recent = deque(maxlen=STALL_WINDOW)
    it = 0
    stop = "max_iters"
    while True:
        if _stationary(v, g, proj, config):
            stop = "grad_tol"
            break
        if it >= config.max_iters:
            break
        it += 1
        direction = -g * scale
        while True:
            v_try = proj(v + step * direction)
            dv = v_try - v
            df = _dual_change(terms, dv, mdp, alpha, beta)
            if df <= config.armijo_c * float(g @ dv):
                break
            step *= config.backtrack_factor
            if step < 1e-300:
                df = None
                break
        if df is None:
            stop = "line_search"
            break
        terms = _terms(v_try, mdp, alpha, beta)
        f = beta * terms[2]
        g_new = _gradient_from_log_p(terms[5], terms[3], mdp)
        if trace is not None:
            trace.append(f)
        s, y = v_try - v, g_new - g
        v, g = v_try, g_new
        recent.append(-df)
        if len(recent) == STALL_WINDOW and sum(recent) <= config.value_tol * max(1.0, abs(f)):
            stop = "value_tol"
            break
        scale = _diag_scale(terms, mdp, alpha, beta)
        # Barzilai-Borwein step in the metric diag(1 / scale)
        sy = float(s @ y)
        if sy > 0:
            step = float(s @ (s / scale)) / sy if it % 2 else sy / float(y @ (y * scale))
            step = min(max(step, 1e-12), 1e12)
        else:
            step = config.initial_step
    sol = extract_solution(v, mdp, alpha, beta, config, iterations=it,
                           converged=stop == "grad_tol")
    sol.extras["stop_reason"] = stop
    return sol


def _diag_scale(terms, mdp: Mdp, alpha: float, beta: float) -> np.ndarray:
    """Inverse of the exact Hessian diagonal of the dual.

    With M = dA/dV (one row per pair) and k = alpha / beta,

        H_jj = (sum p M_j^2 + (k - 1) sum_s p(s) (sum_a pi M_j)^2 - k g_j^2) / alpha.

    Coordinates whose optimum lies at +-infinity have vanishing curvature;
    scaling by it turns their steps into Newton steps of size about alpha
    or beta, so they approach the limit geometrically.
    """
    _, _, _, log_ps, log_pi, log_p = terms
    m = _jacobian(mdp)
    p, pi = np.exp(log_p), np.exp(log_pi)
    g = m.T @ p
    direct = m.multiply(m).T @ p
    per_state = _aggregate(mdp) @ m.multiply(pi[:, None])
    mixed = np.asarray(per_state.multiply(per_state).T @ np.exp(log_ps)).ravel()
    k = alpha / beta
    h = (direct + (k - 1.0) * mixed - k * g * g) / alpha
    return 1.0 / np.maximum(h, 1e-300)


def _jacobian(mdp: Mdp) -> sparse.csr_matrix:
    """dA/dV = P - E as a sparse (num_pairs, num_states) matrix."""
    own = sparse.csr_matrix((np.ones(mdp.num_pairs), (np.arange(mdp.num_pairs), mdp.pair_state)),
                            shape=(mdp.num_pairs, mdp.num_states))
    return sparse.csr_matrix(mdp.transition_matrix - own)


def _aggregate(mdp: Mdp) -> sparse.csr_matrix:
    """Sums pairs into their states: a (num_states, num_pairs) 0/1 matrix."""
    return sparse.csr_matrix((np.ones(mdp.num_pairs), (mdp.pair_state, np.arange(mdp.num_pairs))),
                             shape=(mdp.num_states, mdp.num_pairs))


def _stationary(v, g, proj: _Projector, config: SolverConfig) -> bool:
    blocked = proj.blocked(v, g)
    pg = np.where(blocked, 0.0, g)
    if float(np.max(np.abs(pg))) >= config.grad_tol:
        return False
    return abs(float(v @ g)) < config.gap_tol
