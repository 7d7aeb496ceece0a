"""Finite MDP data model, validation, reachability and the KL reward shift.

Action sets are ragged: state ``s`` owns actions ``0 .. k_s - 1``. Every
per-(s, a) quantity in the package (rewards, policies, occupancies,
advantages) is stored as a flat array of length ``num_pairs`` where the
actions of state ``s`` occupy ``offsets[s]:offsets[s + 1]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .exceptions import InvalidMdp, InvalidWeights

# Replaces log(0) in KL shifts.
LOG_FLOOR = -1e6
PROB_TOL = 1e-12


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mdp:
    """Tabular MDP with sparse transitions.

    Use :meth:`from_lists` to build one from nested Python lists. The raw
    fields describe transitions in coordinate form: entry ``k`` moves from
    pair ``trans_pair[k]`` to state ``trans_next[k]`` with probability
    ``trans_prob[k]``.
    """

    action_counts: np.ndarray
    trans_pair: np.ndarray
    trans_next: np.ndarray
    trans_prob: np.ndarray
    rewards: np.ndarray
    state_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "action_counts", _frozen(self.action_counts, np.int64))
        object.__setattr__(self, "trans_pair", _frozen(self.trans_pair, np.int64))
        object.__setattr__(self, "trans_next", _frozen(self.trans_next, np.int64))
        object.__setattr__(self, "trans_prob", _frozen(self.trans_prob, float))
        object.__setattr__(self, "rewards", _frozen(self.rewards, float))
        if self.action_counts.ndim != 1:
            raise InvalidMdp("action_counts must be one-dimensional")
        if np.any(self.action_counts < 0):
            raise InvalidMdp("action counts must be non-negative")
        if self.rewards.shape != (self.num_pairs,):
            raise InvalidMdp(
                f"expected {self.num_pairs} rewards, got shape {self.rewards.shape}"
            )
        n = self.trans_pair.shape
        if self.trans_next.shape != n or self.trans_prob.shape != n:
            raise InvalidMdp("transition coordinate arrays differ in length")
        if n[0] and (self.trans_pair.min() < 0 or self.trans_pair.max() >= self.num_pairs):
            raise InvalidMdp("transition entry refers to a non-existent action")
        if self.state_names is not None and len(self.state_names) != self.num_states:
            raise InvalidMdp("state_names length differs from num_states")

    @classmethod
    def from_lists(cls, transitions, rewards=None, state_names=None) -> "Mdp":
        """Build from ``transitions[s][a] = [(s_next, prob), ...]``.

        ``rewards[s][a]`` defaults to zero.
        """
        counts, tp, tn, tq = [], [], [], []
        pair = 0
        for s, acts in enumerate(transitions):
            counts.append(len(acts))
            for succ in acts:
                for nxt, prob in succ:
                    tp.append(pair)
                    tn.append(int(nxt))
                    tq.append(float(prob))
                pair += 1
        if rewards is None:
            flat_r = np.zeros(pair)
        else:
            if len(rewards) != len(transitions):
                raise InvalidMdp("rewards must have one row per state")
            flat_r = []
            for s, row in enumerate(rewards):
                if len(row) != counts[s]:
                    raise InvalidMdp(
                        f"state {s}: {len(row)} rewards for {counts[s]} actions"
                    )
                flat_r.extend(float(x) for x in row)
        names = tuple(state_names) if state_names is not None else None
        return cls(np.asarray(counts, dtype=np.int64), tp, tn, tq, flat_r, names)

    # -- shape helpers ---------------------------------------------------

    @property
    def num_states(self) -> int:
        return int(self.action_counts.shape[0])

    @property
    def num_pairs(self) -> int:
        return int(self.action_counts.sum())

    @cached_property
    def offsets(self) -> np.ndarray:
        off = np.zeros(self.num_states + 1, dtype=np.int64)
        np.cumsum(self.action_counts, out=off[1:])
        off.setflags(write=False)
        return off

    @cached_property
    def pair_state(self) -> np.ndarray:
        ps = np.repeat(np.arange(self.num_states), self.action_counts)
        ps.setflags(write=False)
        return ps

    @cached_property
    def transition_matrix(self) -> sparse.csr_matrix:
        """Sparse ``(num_pairs, num_states)`` matrix of p(s'|s,a)."""
        return sparse.csr_matrix(
            (self.trans_prob, (self.trans_pair, self.trans_next)),
            shape=(self.num_pairs, self.num_states),
        )

    @cached_property
    def dense_transitions(self) -> np.ndarray:
        t = self.transition_matrix.toarray()
        t.setflags(write=False)
        return t

    def pair_index(self, s: int, a: int) -> int:
        if not 0 <= a < self.action_counts[s]:
            raise IndexError(f"state {s} has no action {a}")
        return int(self.offsets[s] + a)

    def successors(self, s: int, a: int) -> list[tuple[int, float]]:
        k = self.pair_index(s, a)
        idx = np.flatnonzero(self.trans_pair == k)
        return [(int(self.trans_next[i]), float(self.trans_prob[i])) for i in idx]

    def split(self, x) -> list[np.ndarray]:
        """Split a flat per-pair array into one array per state."""
        x = np.asarray(x)
        return [x[self.offsets[s]:self.offsets[s + 1]] for s in range(self.num_states)]

    def flatten(self, nested: Sequence[Sequence[float]]) -> np.ndarray:
        """Inverse of :meth:`split`, with shape checking."""
        if len(nested) != self.num_states:
            raise InvalidMdp(f"expected {self.num_states} rows, got {len(nested)}")
        out = []
        for s, row in enumerate(nested):
            if len(row) != self.action_counts[s]:
                raise InvalidMdp(
                    f"state {s}: expected {self.action_counts[s]} entries, got {len(row)}"
                )
            out.extend(float(x) for x in row)
        return np.asarray(out, dtype=float)

    def state_sums(self, x) -> np.ndarray:
        """Sum a per-pair array over actions; leading batch axes are kept."""
        return np.add.reduceat(np.asarray(x, dtype=float), self.offsets[:-1], axis=-1)

    def to_lists(self):
        """Nested ``(transitions, rewards)`` as accepted by :meth:`from_lists`."""
        trans = [[[] for _ in range(k)] for k in self.action_counts]
        for k, nxt, prob in zip(self.trans_pair, self.trans_next, self.trans_prob):
            s = int(self.pair_state[k])
            trans[s][int(k - self.offsets[s])].append((int(nxt), float(prob)))
        return trans, [row.tolist() for row in self.split(self.rewards)]

    def with_rewards(self, rewards) -> "Mdp":
        return Mdp(self.action_counts, self.trans_pair, self.trans_next,
                   self.trans_prob, rewards, self.state_names)

    @cached_property
    def weak_components(self) -> np.ndarray:
        """Label of the weakly connected component of each state."""
        g = self._graph()
        _, labels = csgraph.connected_components(g, directed=True, connection="weak")
        labels.setflags(write=False)
        return labels

    def _graph(self) -> sparse.csr_matrix:
        keep = self.trans_prob > 0
        src = self.pair_state[self.trans_pair[keep]]
        dst = self.trans_next[keep]
        n = self.num_states
        return sparse.csr_matrix((np.ones(src.size), (src, dst)), shape=(n, n))


@dataclass(frozen=True)
class Violation:
    """One failed invariant; ``action`` is None for state-level problems."""

    state: int | None
    action: int | None
    message: str

    def __str__(self):
        where = []
        if self.state is not None:
            where.append(f"s={self.state}")
        if self.action is not None:
            where.append(f"a={self.action}")
        loc = f"({', '.join(where)}) " if where else ""
        return f"{loc}{self.message}"


def validate_mdp(mdp: Mdp) -> list[Violation]:
    """Return every invariant violation; an empty list means the MDP is valid."""
    out: list[Violation] = []
    n = mdp.num_states
    if n == 0:
        out.append(Violation(None, None, "MDP has no states"))
    for s in np.flatnonzero(mdp.action_counts == 0):
        out.append(Violation(int(s), None, "state has no actions"))
    bad_next = (mdp.trans_next < 0) | (mdp.trans_next >= n)
    for k in np.flatnonzero(bad_next):
        s = int(mdp.pair_state[mdp.trans_pair[k]])
        a = int(mdp.trans_pair[k] - mdp.offsets[s])
        out.append(Violation(s, a, f"successor {int(mdp.trans_next[k])} out of range"))
    sums = np.bincount(mdp.trans_pair, weights=mdp.trans_prob, minlength=mdp.num_pairs)
    neg = np.zeros(mdp.num_pairs, dtype=bool)
    np.logical_or.at(neg, mdp.trans_pair, mdp.trans_prob < 0)
    finite_p = np.ones(mdp.num_pairs, dtype=bool)
    np.logical_and.at(finite_p, mdp.trans_pair, np.isfinite(mdp.trans_prob))
    for k in range(mdp.num_pairs):
        s = int(mdp.pair_state[k])
        a = int(k - mdp.offsets[s])
        if not finite_p[k]:
            out.append(Violation(s, a, "non-finite transition probability"))
        elif neg[k]:
            out.append(Violation(s, a, "negative transition probability"))
        elif abs(sums[k] - 1.0) > PROB_TOL:
            out.append(Violation(s, a, f"transition probabilities sum to {sums[k]!r}"))
        if not math.isfinite(mdp.rewards[k]):
            out.append(Violation(s, a, "non-finite reward"))
    return out


def check_valid(mdp: Mdp) -> None:
    """Raise :class:`InvalidMdp` listing every violation, if any."""
    report = validate_mdp(mdp)
    if report:
        raise InvalidMdp("invalid MDP: " + "; ".join(str(v) for v in report))


@dataclass(frozen=True, eq=False)
class DefaultDistributions:
    """Default policy pi0 (flat per pair) and state distribution p0; both optional."""

    policy: np.ndarray | None = None
    state_dist: np.ndarray | None = None

    def validate(self, mdp: Mdp) -> list[Violation]:
        out = []
        if self.policy is not None:
            pi = np.asarray(self.policy, dtype=float)
            if pi.shape != (mdp.num_pairs,):
                return [Violation(None, None, "default policy has the wrong shape")]
            if np.any(pi < 0) or not np.all(np.isfinite(pi)):
                out.append(Violation(None, None, "default policy has negative entries"))
            sums = mdp.state_sums(pi)
            for s in np.flatnonzero(np.abs(sums - 1) > PROB_TOL):
                out.append(Violation(int(s), None, f"default policy row sums to {sums[s]!r}"))
        if self.state_dist is not None:
            p0 = np.asarray(self.state_dist, dtype=float)
            if p0.shape != (mdp.num_states,):
                return out + [Violation(None, None, "default state distribution has the wrong shape")]
            if np.any(p0 < 0) or not np.all(np.isfinite(p0)):
                out.append(Violation(None, None, "default state distribution has negative entries"))
            if abs(p0.sum() - 1) > PROB_TOL:
                out.append(Violation(None, None, f"default state distribution sums to {p0.sum()!r}"))
        return out


def _floored_log(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(x), LOG_FLOOR)


def apply_kl_shift(mdp: Mdp, defaults: DefaultDistributions, alpha: float, beta: float) -> Mdp:
    """Fold default distributions into the reward.

    r~(s,a) = r(s,a) + alpha log pi0(a|s) + beta log p0(s), where log 0 is
    replaced by ``LOG_FLOOR``.
    """
    if alpha < 0 or beta < 0:
        raise InvalidWeights(f"alpha and beta must be >= 0, got ({alpha}, {beta})")
    problems = defaults.validate(mdp)
    if problems:
        raise InvalidMdp("invalid defaults: " + "; ".join(str(v) for v in problems))
    r = mdp.rewards.copy()
    if defaults.policy is not None and alpha != 0:
        r += alpha * _floored_log(defaults.policy)
    if defaults.state_dist is not None and beta != 0:
        r += beta * _floored_log(defaults.state_dist)[mdp.pair_state]
    return mdp.with_rewards(r)


@dataclass(frozen=True, eq=False)
class Reachability:
    communicating: bool
    absorbing: np.ndarray
    scc_labels: np.ndarray

    @property
    def absorbing_states(self) -> list[int]:
        return np.flatnonzero(self.absorbing).tolist()


def absorbing_mask(mdp: Mdp) -> np.ndarray:
    """True where every action of s returns to s with probability 1."""
    self_prob = np.zeros(mdp.num_pairs)
    loop = mdp.trans_next == mdp.pair_state[mdp.trans_pair]
    np.add.at(self_prob, mdp.trans_pair[loop], mdp.trans_prob[loop])
    ok = np.abs(self_prob - 1.0) <= PROB_TOL
    mask = np.logical_and.reduceat(ok, mdp.offsets[:-1]) if mdp.num_pairs else np.zeros(0, bool)
    mask = np.asarray(mask, dtype=bool) & (mdp.action_counts > 0)
    return mask


def reachability_check(mdp: Mdp) -> Reachability:
    """Absorbing flags per state and strong connectivity of the action graph."""
    ncomp, labels = csgraph.connected_components(mdp._graph(), directed=True, connection="strong")
    return Reachability(communicating=bool(ncomp == 1), absorbing=absorbing_mask(mdp),
                        scc_labels=labels)
