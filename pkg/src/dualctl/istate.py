"""Recursive information state: per-hypothesis worst-case accumulated cost.

The state is a vector ``r`` of extended reals (one entry per measurement
hypothesis, -inf marking hypotheses no feasible history can reach) paired
with the current measurement.  ``r`` starts at zero and is updated each
step from ``(u, next measurement)``.  Together with the measurement it is
a sufficient statistic for the disturbance game, and it is translation
equivariant: shifting every entry by c shifts every updated entry by c.

``update_magnitude`` is the closed form for the magnitude-measured
integrator; ``update_generic`` is the same recursion for any
:class:`~dualctl.system.SystemModel`.  Both are validated against
exhaustive history enumeration in :mod:`dualctl.oracle`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

from .errors import InfeasibleObservationError, InfeasibleStateError
from .system import SystemModel

NEG_INF = float("-inf")

__all__ = [
    "InfoState",
    "initial_state",
    "update_magnitude",
    "update_generic",
    "normalize_shift",
    "NEG_INF",
]


@dataclass(frozen=True)
class InfoState:
    """Hypothesis cost vector ``r`` plus the current measurement ``y``."""

    r: Tuple[float, ...]
    y: object

    @property
    def r_plus(self) -> float:
        return self.r[0]

    @property
    def r_minus(self) -> float:
        return self.r[1]

    def max_entry(self) -> float:
        return max(self.r)


def initial_state(y, m: int = 2) -> InfoState:
    """Fresh information state: all hypothesis costs zero."""
    return InfoState((0.0,) * m, y)


def update_magnitude(state: InfoState, u: float, v: float, gamma: float) -> InfoState:
    """Advance the integrator's (r+, r-) after applying u and observing v.

    For each next-sign s, the disturbance reaching s*v from prior sign j
    is w = s*v - u - j*y, so

        r'[s] = y^2 + u^2 + max_j ( r[j] - gamma^2 (s*v - u - j*y)^2 ).

    Both entries are computed from the pre-update vector; -inf entries
    propagate through the max.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    if v < 0 or not math.isfinite(v):
        raise ValueError(f"measurement must be finite and nonnegative, got {v!r}")
    y = state.y
    if y < 0:
        raise ValueError(f"current measurement must be nonnegative, got {y!r}")
    rp, rm = state.r
    g2 = gamma * gamma
    base = y * y + u * u
    ap = max(rp - g2 * (v - u - y) ** 2, rm - g2 * (v - u + y) ** 2)
    am = max(rp - g2 * (-v - u - y) ** 2, rm - g2 * (-v - u + y) ** 2)
    new = (base + ap, base + am)
    if new[0] == NEG_INF and new[1] == NEG_INF:
        raise InfeasibleObservationError(
            f"observation {v!r} is infeasible from every hypothesis"
        )
    return InfoState(new, v)


def update_generic(state: InfoState, u, v, system: SystemModel, gamma: float) -> InfoState:
    """Advance ``r`` for an arbitrary system with enumerable hypotheses.

    For each next hypothesis, maximize stage cost plus prior entry over
    the prior hypotheses whose transition is feasible; the disturbance is
    recovered by ``system.disturbance_from_transition`` (``None`` marks an
    infeasible transition and contributes -inf).

    Agrees with :func:`update_magnitude` on the integrator.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    cur = system.preimage(state.y)
    nxt = system.preimage(v)
    if len(state.r) != len(cur):
        raise ValueError(
            f"state has {len(state.r)} entries but the system enumerates {len(cur)}"
        )
    new = []
    for xi_next in nxt:
        best = NEG_INF
        for j, xi in enumerate(cur):
            if state.r[j] == NEG_INF:
                continue
            w = system.disturbance_from_transition(xi_next, xi, u)
            if w is None:
                continue
            cand = system.stage_cost(xi, u, w, gamma) + state.r[j]
            if cand > best:
                best = cand
        new.append(best)
    if all(x == NEG_INF for x in new):
        raise InfeasibleObservationError(
            f"observation {v!r} is infeasible from every hypothesis"
        )
    return InfoState(tuple(new), v)


def normalize_shift(state: InfoState):
    """Shift the max entry to zero; return (shifted state, offset).

    The update commutes with uniform shifts, so ``shifted + offset``
    reconstructs the original exactly.
    """
    m = state.max_entry()
    if m == NEG_INF:
        raise InfeasibleStateError("every hypothesis entry is -inf")
    return InfoState(tuple(x - m for x in state.r), state.y), m
