"""Control policies: the certainty-equivalence sign controller and the
comparison controllers it is measured against.

A :class:`Policy` is a deterministic map from (information state, time
index) to a control.  The certainty-equivalence controller applies a
fixed relative gain whose sign follows whichever hypothesis currently
carries the larger worst-case cost; the myopic, alternating, and
proportional controllers exist to exhibit known failure modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import InfeasibleStateError
from .istate import NEG_INF, InfoState

__all__ = [
    "Policy",
    "ce_sign_policy",
    "myopic_policy",
    "myopic_literal_policy",
    "alternating_policy",
    "proportional_policy",
    "make_policy",
    "POLICY_NAMES",
]


@dataclass(frozen=True)
class Policy:
    """Named decision rule (InfoState, t) -> u."""

    name: str
    fn: Callable[[InfoState, int], float]
    uses_info_state: bool = True
    uses_time: bool = False
    params: dict = field(default_factory=dict)

    def __call__(self, state: InfoState, t: int) -> float:
        return self.fn(state, t)


def _check_feasible(state: InfoState):
    rp, rm = state.r
    if rp == NEG_INF and rm == NEG_INF:
        raise InfeasibleStateError("both hypothesis entries are -inf")
    return rp, rm


def ce_sign_policy(state: InfoState, k: float, tie_sign: float = 1.0) -> float:
    """u = k * sign(r- - r+) * y, pushing against the costlier hypothesis.

    ``tie_sign`` resolves r+ == r- (e.g. the very first step); +1 by
    default.
    """
    rp, rm = _check_feasible(state)
    if rp == rm:
        s = tie_sign
    else:
        s = 1.0 if rm > rp else -1.0
    return k * s * state.y


def myopic_policy(state: InfoState) -> float:
    """One-step minimax control: minimize the worst next-step cost.

    Solves min_u max_s { r[s] + (s*y + u)^2 + u^2 } over the two sign
    hypotheses (disturbance-free lookahead).  Closed form: the optimum is
    the crossing point (r- - r+) / (4y) clamped to [-y/2, y/2], the
    argmins of the individual quadratics.
    """
    rp, rm = _check_feasible(state)
    y = state.y
    if y == 0:
        return 0.0
    if rp == NEG_INF:
        return y / 2
    if rm == NEG_INF:
        return -y / 2
    u = (rm - rp) / (4.0 * y)
    return min(max(u, -y / 2), y / 2)


def myopic_literal_policy(state: InfoState) -> float:
    """Literal myopic reading: u = 0 minimizes the current cost x^2 + u^2."""
    _check_feasible(state)
    return 0.0


def alternating_policy(t: int, y: float) -> float:
    """Time-varying deadbeat rule u = (-1)^t y; zeros the noiseless state
    from t = 2 for any initial condition."""
    if t < 0:
        raise ValueError(f"time index must be nonnegative, got {t!r}")
    return y if t % 2 == 0 else -y


def proportional_policy(y: float, gain: float) -> float:
    """Static proportional feedback u = gain * y (not stabilizing here)."""
    return gain * y


POLICY_NAMES = (
    "ce-sign",
    "myopic",
    "myopic-literal",
    "alternating",
    "proportional",
    "zero",
)


def make_policy(name: str, *, k: float = 0.7, tie_sign: float = 1.0,
                gain: float = 0.0) -> Policy:
    """Construct a named policy; parameters not used by the rule are ignored."""
    if name == "ce-sign":
        return Policy(name, lambda s, t: ce_sign_policy(s, k, tie_sign),
                      params={"k": k, "tie_sign": tie_sign})
    if name == "myopic":
        return Policy(name, lambda s, t: myopic_policy(s))
    if name == "myopic-literal":
        return Policy(name, lambda s, t: myopic_literal_policy(s))
    if name == "alternating":
        return Policy(name, lambda s, t: alternating_policy(t, s.y),
                      uses_info_state=False, uses_time=True)
    if name == "proportional":
        return Policy(name, lambda s, t: proportional_policy(s.y, gain),
                      uses_info_state=False, params={"gain": gain})
    if name == "zero":
        return Policy(name, lambda s, t: 0.0, uses_info_state=False)
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
