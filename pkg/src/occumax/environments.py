"""Benchmark MDPs: the outer/inner toy, a room with a corridor, and a ring.

All three are deterministic and reward-free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import BracketFailure, InvalidWeights
from .mdp import Mdp

ROOM_SIZE = 3
# Row of the room that the corridor leaves from (the middle one).
JUNCTION_ROW = 1
TOY_BRACKET = (-50.0, 50.0)


def _deterministic(successors, names=None) -> Mdp:
    return Mdp.from_lists([[[(t, 1.0)] for t in row] for row in successors], state_names=names)


# -- toy ---------------------------------------------------------------------


def make_toy(n: int) -> Mdp:
    """Two outer states (0, 1) and ``n`` inner states (2 .. n + 1).

    Outer state actions: first to the other outer state, then to each inner
    state in order. Inner state actions: to outer 0, to outer 1.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"toy needs n >= 1 inner states, got {n}")
    inner = list(range(2, n + 2))
    succ = [[1] + inner, [0] + inner] + [[0, 1] for _ in inner]
    names = ["outer0", "outer1"] + [f"inner{i}" for i in range(n)]
    return _deterministic(succ, names)


@dataclass(frozen=True)
class ToySolution:
    """u = V(outer) - V(inner); pi_n = probability of staying among outer states."""

    u: float
    pi_n: float
    p_outer: float
    p_inner: float
    regime: str


def _toy_residual(u, n, alpha, beta):
    # Zero of the dual's derivative in u, written in log form; decreasing in u.
    k = alpha / beta
    return (k - 1.0) * (math.log1p(n * math.exp(-u / alpha)) - math.log(2.0)) - u / alpha - u / beta


def toy_closed_form(n: int, alpha: float, beta: float, tol: float = 1e-12) -> ToySolution:
    """Optimal value gap and occupancies of the toy MDP.

    alpha == 0 or beta == 0 select the closed-form limits; otherwise the
    stationarity condition in u is solved by bracketed root finding on
    [-50, 50].
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"toy needs n >= 1 inner states, got {n}")
    if alpha < 0 or beta < 0 or (alpha == 0 and beta == 0):
        raise InvalidWeights(f"need alpha, beta >= 0 and not both zero, got ({alpha}, {beta})")
    if beta == 0:
        u = alpha * (math.log(1.0 + math.sqrt(1.0 + 8.0 * n)) - 2.0 * math.log(2.0))
        pi_n = 1.0 / (1.0 + n * math.exp(-u / alpha))
        regime = "beta-zero"
    elif alpha == 0:
        # pi_n and p_outer evaluate the softmax at temperature beta. The
        # alpha -> 0 limit of the optimal occupancy is p_outer = 1/4 instead.
        u = -beta * math.log(n / 2.0) / 2.0 if n > 1 else 0.0
        pi_n = 1.0 / (1.0 + n * math.exp(-u / beta))
        regime = "alpha-zero"
    elif alpha == beta:
        u = 0.0
        pi_n = 1.0 / (1.0 + n)
        regime = "equal"
    else:
        lo, hi = TOY_BRACKET
        f_lo, f_hi = _toy_residual(lo, n, alpha, beta), _toy_residual(hi, n, alpha, beta)
        if not (f_lo > 0 > f_hi):
            raise BracketFailure(
                f"no sign change of the toy residual on [{lo}, {hi}] "
                f"(values {f_lo:.3e}, {f_hi:.3e}) for n={n}, alpha={alpha}, beta={beta}"
            )
        u = brentq(_toy_residual, lo, hi, args=(n, alpha, beta), xtol=tol, rtol=4 * np.finfo(float).eps)
        pi_n = 1.0 / (1.0 + n * math.exp(-u / alpha))
        regime = "general"
    p_outer = 1.0 / (2.0 * (2.0 - pi_n))
    return ToySolution(u=u, pi_n=pi_n, p_outer=p_outer, p_inner=(1.0 - 2.0 * p_outer) / n,
                       regime=regime)


# -- grid world --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Geometry of the room-and-corridor arena.

    ``cells[s]`` is the (row, col) of state ``s`` on a grid of ``shape``;
    ``cell_index[row, col]`` is the state there or -1. The room occupies
    rows 0-2, columns 0-2; the corridor is row 1, columns 3 .. 2 + N.
    """

    corridor_len: int
    shape: tuple[int, int]
    cells: tuple[tuple[int, int], ...]
    cell_index: np.ndarray
    corridor_states: tuple[int, ...]
    junction_state: int

    @property
    def num_states(self) -> int:
        return len(self.cells)

    @property
    def room_states(self) -> tuple[int, ...]:
        return tuple(s for s in range(self.num_states) if s not in set(self.corridor_states))


# Action order after "stay": row-major over the 8-neighbourhood.
MOVES = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def grid_spec(corridor_len: int) -> GridSpec:
    n = int(corridor_len)
    if n < 1:
        raise ValueError(f"corridor length must be >= 1, got {n}")
    cells = [(r, c) for r in range(ROOM_SIZE) for c in range(ROOM_SIZE)]
    cells += [(JUNCTION_ROW, ROOM_SIZE + i) for i in range(n)]
    shape = (ROOM_SIZE, ROOM_SIZE + n)
    index = np.full(shape, -1, dtype=np.int64)
    for s, (r, c) in enumerate(cells):
        index[r, c] = s
    index.setflags(write=False)
    corridor = tuple(range(ROOM_SIZE * ROOM_SIZE, len(cells)))
    junction = int(index[JUNCTION_ROW, ROOM_SIZE - 1])
    return GridSpec(n, shape, tuple(cells), index, corridor, junction)


def make_gridworld(corridor_len: int) -> tuple[Mdp, GridSpec]:
    """Room-and-corridor MDP and its geometry.

    Each cell has "stay" as action 0 followed by one action per existing
    8-neighbour. Moves off the arena are absent, not mapped to "stay".
    """
    spec = grid_spec(corridor_len)
    rows, cols = spec.shape
    succ = []
    for s, (r, c) in enumerate(spec.cells):
        row = [s]
        for dr, dc in MOVES:
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols and spec.cell_index[rr, cc] >= 0:
                row.append(int(spec.cell_index[rr, cc]))
        succ.append(row)
    names = [f"r{r}c{c}" for r, c in spec.cells]
    return _deterministic(succ, names), spec


# -- ring --------------------------------------------------------------------


def make_ring(n: int) -> Mdp:
    """Circular chain; action 0 moves to s - 1, action 1 to s + 1 (mod n)."""
    n = int(n)
    if n < 2:
        raise ValueError(f"ring needs n >= 2 states, got {n}")
    return _deterministic([[(s - 1) % n, (s + 1) % n] for s in range(n)])
