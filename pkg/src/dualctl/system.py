"""Dynamical systems whose measurement map has a bounded-cardinality preimage.

A :class:`SystemModel` bundles the dynamics ``x+ = f(x, u, w)``, the
measurement ``y = h(x)``, a per-step stage cost, an enumerator of the at
most ``hypothesis_bound`` states consistent with a measurement, and the
inverse map recovering the disturbance from a state transition.  Three
built-in families are provided:

* the scalar integrator measured through its magnitude,
* input-output difference equations measured through output magnitudes
  (companion-form state-space realization, sign hypotheses),
* linear systems whose (A, B) pair is one of finitely many models.

All built-ins have unrestricted disturbances, so every hypothesis
transition is feasible and the recovered ``w`` is unique.  Custom models
may return ``None`` from ``disturbance_from_transition`` to mark an
infeasible transition; downstream recursions then treat it as -inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "SystemModel",
    "IORealization",
    "LinearModelSet",
    "integrator_step",
    "measure_magnitude",
    "stage_cost",
    "preimage",
    "make_integrator",
    "build_io_realization",
    "make_linear_model_set",
]


@dataclass(frozen=True)
class SystemModel:
    """A discrete-time system with a finitely ambiguous measurement map.

    ``preimage(y)`` returns exactly ``hypothesis_bound`` candidate states
    with stable indexing; coinciding solutions (e.g. a zero magnitude) are
    kept as duplicates so the hypothesis vector never changes shape.
    """

    name: str
    state_dim: int
    hypothesis_bound: int
    dynamics: Callable
    measurement: Callable
    preimage: Callable
    disturbance_from_transition: Callable
    stage_cost: Callable


def _require_finite(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


def integrator_step(x: float, u: float, w: float) -> float:
    """One step of the scalar integrator: x + u + w."""
    _require_finite("x", x)
    _require_finite("u", u)
    _require_finite("w", w)
    return x + u + w


def measure_magnitude(x: float) -> float:
    """Magnitude measurement |x|; the sign of the state is not observed."""
    _require_finite("x", x)
    return abs(x)


def stage_cost(x: float, u: float, w: float, gamma: float) -> float:
    """Per-step payoff x^2 + u^2 - gamma^2 w^2 of the disturbance game."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    return x * x + u * u - gamma * gamma * w * w


def preimage(system: SystemModel, y) -> list:
    """States consistent with measurement ``y``, in stable index order."""
    return system.preimage(y)


# ---------------------------------------------------------------------------
# integrator


def _integrator_preimage(y: float) -> list:
    _require_finite("y", y)
    if y < 0:
        raise ValueError(f"magnitude measurement must be nonnegative, got {y!r}")
    # "+ 0.0" normalizes -0.0 so the duplicated root prints cleanly
    return [y + 0.0, -y + 0.0]


def make_integrator() -> SystemModel:
    """The magnitude-measured scalar integrator (hypotheses +y, -y)."""
    return SystemModel(
        name="integrator",
        state_dim=1,
        hypothesis_bound=2,
        dynamics=lambda x, u, w: x + u + w,
        measurement=lambda x: abs(x),
        preimage=_integrator_preimage,
        disturbance_from_transition=lambda x_next, x, u: x_next - x - u,
        stage_cost=stage_cost,
    )


# ---------------------------------------------------------------------------
# input-output realizations


@dataclass(frozen=True)
class IORealization(SystemModel):
    """Companion-form realization of an order-d difference equation.

    The state stacks the last d outputs and the last d-1 inputs
    (dimension 2d - 1).  The measurement records output magnitudes and
    past inputs, so the preimage enumerates the 2^d sign assignments of
    the stored outputs.
    """

    a_coeffs: tuple = ()
    b_coeffs: tuple = ()
    A: np.ndarray = None
    B: np.ndarray = None
    G: np.ndarray = None


def _io_matrices(a: np.ndarray, b: np.ndarray):
    d = len(a)
    n = 2 * d - 1
    A = np.zeros((n, n))
    A[0, :d] = -a
    A[0, d:] = b[1:]
    for i in range(1, d):
        A[i, i - 1] = 1.0
    for i in range(d + 1, n):
        A[i, i - 1] = 1.0
    B = np.zeros(n)
    B[0] = b[0]
    if d >= 2:
        B[d] = 1.0
    G = np.zeros(n)
    G[0] = 1.0
    return A, B, G


def build_io_realization(a_coeffs: Sequence[float], b_coeffs: Sequence[float]) -> IORealization:
    """Realize z+ = -a1 z - ... - ad z_old + b1 u + ... + bd u_old + w."""
    a = np.asarray(a_coeffs, dtype=float)
    b = np.asarray(b_coeffs, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or len(a) != len(b):
        raise ValueError("a_coeffs and b_coeffs must be equal-length sequences")
    if len(a) == 0:
        raise ValueError("at least one coefficient pair is required")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("coefficients must be finite")
    d = len(a)
    n = 2 * d - 1
    A, B, G = _io_matrices(a, b)

    def dynamics(x, u, w):
        return A @ np.asarray(x, dtype=float) + B * u + G * w

    def measurement(x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        out[:d] = np.abs(out[:d])
        return out

    def io_preimage(y):
        y = np.asarray(y, dtype=float)
        if y.shape != (n,):
            raise ValueError(f"measurement must have shape ({n},), got {y.shape}")
        if not np.isfinite(y).all():
            raise ValueError("measurement entries must be finite")
        if (y[:d] < 0).any():
            raise ValueError("stored magnitudes must be nonnegative")
        states = []
        for idx in range(2 ** d):
            x = y.copy()
            for k in range(d):
                if (idx >> (d - 1 - k)) & 1:
                    x[k] = -x[k] + 0.0
            states.append(x)
        return states

    def disturbance_from_transition(x_next, x, u):
        x_next = np.asarray(x_next, dtype=float)
        pred = A @ np.asarray(x, dtype=float) + B * u
        # shift entries are exact copies, so equality is exact for real
        # transitions between hypothesis sets built from the same record
        if n > 1 and not np.array_equal(x_next[1:], pred[1:]):
            return None
        return x_next[0] - pred[0]

    def io_stage_cost(x, u, w, gamma):
        return stage_cost(float(np.asarray(x).flat[0]), u, w, gamma)

    return IORealization(
        name="io",
        state_dim=n,
        hypothesis_bound=2 ** d,
        dynamics=dynamics,
        measurement=measurement,
        preimage=io_preimage,
        disturbance_from_transition=disturbance_from_transition,
        stage_cost=io_stage_cost,
        a_coeffs=tuple(a),
        b_coeffs=tuple(b),
        A=A,
        B=B,
        G=G,
    )


# ---------------------------------------------------------------------------
# finite model sets


@dataclass(frozen=True)
class LinearModelSet(SystemModel):
    """Linear dynamics with an unknown (A, B) pair from a finite set.

    The lifted state is ``(z, model_index)``; the measurement reveals z,
    so the hypotheses are the candidate models.  Models never switch:
    transitions between different indices are infeasible.
    """

    models: tuple = ()


def make_linear_model_set(models: Sequence) -> LinearModelSet:
    """Build the lifted system for candidate (A, B) pairs."""
    if len(models) == 0:
        raise ValueError("at least one (A, B) model is required")
    norm = []
    n = None
    for A, B in models:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float)
        if B.ndim == 0:
            B = B.reshape(1)
        if A.shape[0] != A.shape[1]:
            raise ValueError("A matrices must be square")
        if n is None:
            n = A.shape[0]
        if A.shape[0] != n or B.shape[0] != n:
            raise ValueError("all models must share the state dimension")
        norm.append((A, B))
    norm = tuple(norm)

    def _z(state):
        return np.asarray(state[0], dtype=float).reshape(n)

    def dynamics(state, u, w):
        z, idx = state
        A, B = norm[idx]
        z_next = A @ _z(state) + B * np.asarray(u, dtype=float).reshape(-1)[0] \
            + np.asarray(w, dtype=float).reshape(n)
        return (z_next, idx)

    def measurement(state):
        return _z(state).copy()

    def ms_preimage(z):
        z = np.asarray(z, dtype=float).reshape(n)
        if not np.isfinite(z).all():
            raise ValueError("measurement entries must be finite")
        return [(z.copy(), idx) for idx in range(len(norm))]

    def disturbance_from_transition(state_next, state, u):
        z_next, idx_next = state_next
        z, idx = state
        if idx_next != idx:
            return None
        A, B = norm[idx]
        return np.asarray(z_next, dtype=float).reshape(n) - A @ _z(state) \
            - B * np.asarray(u, dtype=float).reshape(-1)[0]

    def ms_stage_cost(state, u, w, gamma):
        if gamma <= 0:
            raise ValueError(f"gamma must be positive, got {gamma!r}")
        z = _z(state)
        w = np.asarray(w, dtype=float)
        u = np.asarray(u, dtype=float)
        return float(z @ z + u.reshape(-1) @ u.reshape(-1)
                     - gamma * gamma * (w.reshape(-1) @ w.reshape(-1)))

    return LinearModelSet(
        name="linear-model-set",
        state_dim=n,
        hypothesis_bound=len(norm),
        dynamics=dynamics,
        measurement=measurement,
        preimage=ms_preimage,
        disturbance_from_transition=disturbance_from_transition,
        stage_cost=ms_stage_cost,
        models=norm,
    )
