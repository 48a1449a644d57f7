"""Exhaustive short-horizon ground truth for the information-state recursion.

For the integrator, a measurement record of length T+1 admits 2^(T+1)
sign assignments; each assignment pins the state path, which pins every
disturbance, so the worst-case accumulated cost is an exact finite max.
These brute-force values anchor the correctness of the recursive update:
the two computations share no code path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ResourceLimitError
from .istate import NEG_INF, InfoState, update_magnitude
from .system import SystemModel

__all__ = [
    "HistoryEnumeration",
    "enumerate_histories",
    "worst_case_history",
    "brute_force_r",
    "evaluate_cost",
    "sup_objective_grid",
    "DEFAULT_HORIZON_CAP",
    "DEFAULT_ENUMERATION_CAP",
]

DEFAULT_HORIZON_CAP = 16
DEFAULT_ENUMERATION_CAP = 10_000_000


@dataclass(frozen=True)
class HistoryEnumeration:
    """All sign assignments for an integrator measurement record.

    ``signs`` has one row per assignment (+1/-1, column t is the sign of
    y_t); ``disturbances`` the implied w path; ``costs`` the accumulated
    stage cost of each assignment.
    """

    horizon: int
    signs: np.ndarray
    disturbances: np.ndarray
    costs: np.ndarray


def _check_lengths(y_seq, u_seq, horizon_cap):
    if len(y_seq) != len(u_seq) + 1:
        raise ValueError(
            f"need len(y_seq) == len(u_seq) + 1, got {len(y_seq)} and {len(u_seq)}"
        )
    t = len(u_seq)
    if t > horizon_cap:
        raise ResourceLimitError(
            f"horizon {t} exceeds the enumeration cap {horizon_cap}"
        )
    return t


def enumerate_histories(y_seq: Sequence[float], u_seq: Sequence[float],
                        gamma: float,
                        horizon_cap: int = DEFAULT_HORIZON_CAP) -> HistoryEnumeration:
    """Enumerate every sign assignment of the record and its cost."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    y = np.asarray(y_seq, dtype=float)
    u = np.asarray(u_seq, dtype=float)
    if (y < 0).any():
        raise ValueError("measurements must be nonnegative")
    t = _check_lengths(y, u, horizon_cap)
    count = 2 ** (t + 1)
    bits = (np.arange(count)[:, None] >> np.arange(t, -1, -1)[None, :]) & 1
    signs = np.where(bits == 0, 1.0, -1.0)
    states = signs * y[None, :]
    if t > 0:
        w = states[:, 1:] - states[:, :-1] - u[None, :]
        costs = np.sum(states[:, :-1] ** 2, axis=1) + float(u @ u) \
            - gamma * gamma * np.sum(w * w, axis=1)
    else:
        w = np.zeros((count, 0))
        costs = np.zeros(count)
    return HistoryEnumeration(horizon=t, signs=signs, disturbances=w, costs=costs)


def worst_case_history(y_seq, u_seq, gamma: float, terminal_index: int,
                       system: Optional[SystemModel] = None,
                       horizon_cap: int = DEFAULT_HORIZON_CAP) -> float:
    """Max accumulated cost over histories ending in the given hypothesis.

    Integrator indices: 0 for the positive sign, 1 for the negative.
    Returns -inf when no consistent history exists (possible only with
    restricted disturbance sets).
    """
    if system is None or system.name == "integrator":
        if terminal_index not in (0, 1):
            raise ValueError(f"terminal_index must be 0 or 1, got {terminal_index!r}")
        enum = enumerate_histories(y_seq, u_seq, gamma, horizon_cap)
        want = 1.0 if terminal_index == 0 else -1.0
        mask = enum.signs[:, -1] == want
        return float(enum.costs[mask].max()) if mask.any() else NEG_INF
    return _worst_case_generic(y_seq, u_seq, gamma, terminal_index, system,
                               horizon_cap)


def _worst_case_generic(y_seq, u_seq, gamma, terminal_index, system, horizon_cap):
    t = _check_lengths(y_seq, u_seq, horizon_cap)
    hyps = [system.preimage(y) for y in y_seq]
    m = system.hypothesis_bound
    if not 0 <= terminal_index < m:
        raise ValueError(f"terminal_index must be in [0, {m}), got {terminal_index!r}")
    best = NEG_INF
    for path in itertools.product(*(range(m) for _ in range(t))):
        full = path + (terminal_index,)
        cost = 0.0
        feasible = True
        for step in range(t):
            xi = hyps[step][full[step]]
            xi_next = hyps[step + 1][full[step + 1]]
            w = system.disturbance_from_transition(xi_next, xi, u_seq[step])
            if w is None:
                feasible = False
                break
            cost += system.stage_cost(xi, u_seq[step], w, gamma)
        if feasible and cost > best:
            best = cost
    return best


def brute_force_r(y_seq, u_seq, gamma: float,
                  system: Optional[SystemModel] = None,
                  horizon_cap: int = DEFAULT_HORIZON_CAP) -> np.ndarray:
    """Worst-case cost per terminal hypothesis; oracle for the recursion."""
    if system is None or system.name == "integrator":
        enum = enumerate_histories(y_seq, u_seq, gamma, horizon_cap)
        out = np.empty(2)
        for idx, want in ((0, 1.0), (1, -1.0)):
            mask = enum.signs[:, -1] == want
            out[idx] = enum.costs[mask].max() if mask.any() else NEG_INF
        return out
    m = system.hypothesis_bound
    return np.array([
        _worst_case_generic(y_seq, u_seq, gamma, i, system, horizon_cap)
        for i in range(m)
    ])


def evaluate_cost(policy, w_seq, x0: float, gamma: float):
    """Closed-loop accumulated stage cost at one disturbance realization.

    Returns ``(total, trajectory)`` with total = cum_cost - gamma^2
    cum_dist at the final step; a lower bound on the policy's worst case.
    """
    from . import sim  # local import; sim does not depend on this module

    traj = sim.simulate(None, policy, w_seq, x0, gamma)
    total = float(traj.cum_cost[-1] - gamma * gamma * traj.cum_dist[-1])
    return total, traj


def sup_objective_grid(policy, gamma: float, n: int, v_grid: Sequence[float],
                       y0: float = 0.0,
                       enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Exhaustive lower bound on the worst-case objective over a v-grid.

    Enumerates every measurement continuation (v_0, ..., v_n) drawn from
    ``v_grid`` starting at y_0, drives the recursion with the policy's
    controls, and returns the best achieved max-entry of r at step n+1.
    """
    if n < 0:
        raise ValueError(f"horizon must be nonnegative, got {n!r}")
    v_grid = [float(v) for v in v_grid]
    if not v_grid:
        raise ValueError("v_grid must be nonempty")
    total = len(v_grid) ** (n + 1)
    if total > enumeration_cap:
        raise ResourceLimitError(
            f"{total} sequences exceed the enumeration cap {enumeration_cap}"
        )

    def rec(state: InfoState, t: int) -> float:
        if t == n + 1:
            return state.max_entry()
        u = policy(state, t)
        best = NEG_INF
        for v in v_grid:
            nxt = update_magnitude(state, u, v, gamma)
            val = rec(nxt, t + 1)
            if val > best:
                best = val
        return best

    return rec(InfoState((0.0, 0.0), float(y0)), 0)
