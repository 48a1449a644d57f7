"""Closed-loop simulation, disturbance generation, and gain accounting.

The loop measures, queries the policy with the recursively updated
information state, applies the control, then the disturbance.  Per-step
records include both hypothesis costs, the certificate bound when one is
attached, and running sums of cost and disturbance energy for prefix-wise
gain checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import certify
from .control import Policy
from .errors import DivergenceError, PolicyFaultError
from .istate import InfoState, update_magnitude
from .system import SystemModel, make_integrator

__all__ = [
    "Trajectory",
    "DisturbanceSpec",
    "SearchSettings",
    "generate_disturbance",
    "read_disturbance_file",
    "simulate",
    "empirical_gain",
    "peak_prefix_gain",
    "adversarial_search",
    "write_trajectory_csv",
    "TRAJECTORY_HEADER",
]

DIVERGENCE_GUARD = 1e12

TRAJECTORY_HEADER = "t,x,y,u,w,r_plus,r_minus,vbar,cum_cost,cum_dist"


@dataclass
class Trajectory:
    """Time-indexed closed-loop record (indices 0..N inclusive)."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    w: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray
    vbar: Optional[np.ndarray]
    cum_cost: np.ndarray
    cum_dist: np.ndarray
    gamma: float
    policy_name: str
    x0: float
    seed: Optional[int] = None

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class DisturbanceSpec:
    """Named disturbance family.

    kinds: ``sinusoid`` (amplitude * sin(2 pi t / period)), ``constant``,
    ``random-uniform`` (seeded, on [-bound, bound]), ``file`` (one real
    per line), ``adversarial`` (resolved by the search driver, not here).
    """

    kind: str = "sinusoid"
    amplitude: float = 1.0
    period: float = 20.0
    bound: float = 1.0
    seed: int = 0
    path: Optional[str] = None


def generate_disturbance(spec: DisturbanceSpec, n: int) -> np.ndarray:
    """Length n+1 disturbance sequence for steps 0..n."""
    if n < 0:
        raise ValueError(f"horizon must be nonnegative, got {n!r}")
    t = np.arange(n + 1, dtype=float)
    if spec.kind == "sinusoid":
        return spec.amplitude * np.sin(2.0 * math.pi * t / spec.period)
    if spec.kind == "constant":
        return np.full(n + 1, float(spec.amplitude))
    if spec.kind == "random-uniform":
        rng = np.random.default_rng(spec.seed)
        return rng.uniform(-spec.bound, spec.bound, n + 1)
    if spec.kind == "file":
        if spec.path is None:
            raise ValueError("file disturbance requires a path")
        w = read_disturbance_file(spec.path)
        if len(w) < n + 1:
            raise ValueError(
                f"disturbance file {spec.path} has {len(w)} values, need {n + 1}"
            )
        return w[: n + 1]
    if spec.kind == "adversarial":
        raise ValueError(
            "adversarial disturbances are produced by adversarial_search, "
            "not generate_disturbance"
        )
    raise ValueError(f"unknown disturbance kind {spec.kind!r}")


def read_disturbance_file(path) -> np.ndarray:
    """Parse a one-real-per-line disturbance file."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(float(line))
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: expected a real number, got {line!r}"
                ) from None
    return np.asarray(out, dtype=float)


def _require_integrator(system: Optional[SystemModel]) -> SystemModel:
    if system is None:
        return make_integrator()
    if system.name != "integrator" or system.hypothesis_bound != 2:
        raise ValueError(
            "simulate supports the scalar magnitude-measured integrator; "
            f"got system {system.name!r}"
        )
    return system


def simulate(system: Optional[SystemModel], policy: Policy,
             w_seq: Sequence[float], x0: float, gamma: float,
             cert: Optional[certify.Certificate] = None,
             seed: Optional[int] = None) -> Trajectory:
    """Run the closed loop for t = 0..N with N = len(w_seq) - 1.

    Records the certificate bound per step when ``cert`` is given.
    Raises :class:`PolicyFaultError` on a non-finite control and
    :class:`DivergenceError` (carrying the partial trajectory) when |x|
    passes the guard.
    """
    _require_integrator(system)
    w_seq = np.asarray(w_seq, dtype=float)
    n = len(w_seq) - 1
    if n < 0:
        raise ValueError("w_seq must contain at least one entry")

    xs = np.empty(n + 1)
    ys = np.empty(n + 1)
    us = np.empty(n + 1)
    rps = np.empty(n + 1)
    rms = np.empty(n + 1)
    vbs = np.empty(n + 1) if cert is not None else None
    ccost = np.empty(n + 1)
    cdist = np.empty(n + 1)

    def _partial(upto):
        return Trajectory(
            t=np.arange(upto, dtype=int), x=xs[:upto].copy(), y=ys[:upto].copy(),
            u=us[:upto].copy(), w=w_seq[:upto].copy(),
            r_plus=rps[:upto].copy(), r_minus=rms[:upto].copy(),
            vbar=None if vbs is None else vbs[:upto].copy(),
            cum_cost=ccost[:upto].copy(), cum_dist=cdist[:upto].copy(),
            gamma=gamma, policy_name=policy.name, x0=x0, seed=seed,
        )

    x = float(x0)
    state = InfoState((0.0, 0.0), abs(x))
    cost = 0.0
    dist = 0.0
    for t in range(n + 1):
        if abs(x) > DIVERGENCE_GUARD:
            raise DivergenceError(
                f"|x| exceeded {DIVERGENCE_GUARD:g} at t={t}", trajectory=_partial(t)
            )
        y = abs(x)
        u = policy(state, t)
        if not math.isfinite(u):
            raise PolicyFaultError(
                f"policy {policy.name!r} emitted non-finite control {u!r} at t={t}"
            )
        w = w_seq[t]
        xs[t], ys[t], us[t] = x, y, u
        rps[t], rms[t] = state.r
        if vbs is not None:
            vbs[t] = certify.vbar(state.r, y, cert)
        cost += x * x + u * u
        dist += w * w
        ccost[t], cdist[t] = cost, dist
        x = x + u + w
        if t < n:
            state = update_magnitude(state, u, abs(x), gamma)
    return _partial(n + 1)


def empirical_gain(traj: Trajectory) -> float:
    """sqrt(cum_cost / cum_dist) at the final step; 0/0 -> 0, c/0 -> inf."""
    c = float(traj.cum_cost[-1])
    d = float(traj.cum_dist[-1])
    if d == 0.0:
        return 0.0 if c == 0.0 else math.inf
    return math.sqrt(c / d)


def peak_prefix_gain(traj: Trajectory) -> float:
    """Running maximum over prefixes of sqrt(cum_cost_t / cum_dist_t)."""
    best = 0.0
    for c, d in zip(traj.cum_cost, traj.cum_dist):
        if d == 0.0:
            if c > 0.0:
                return math.inf
            continue
        best = max(best, math.sqrt(c / d))
    return best


def write_trajectory_csv(traj: Trajectory, path):
    """Write the fixed-header trajectory CSV (vbar empty without a certificate)."""
    def fmt(v):
        return format(float(v), ".17g")

    with open(path, "w") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for i in range(len(traj)):
            vb = "" if traj.vbar is None else fmt(traj.vbar[i])
            fh.write(",".join([
                str(int(traj.t[i])), fmt(traj.x[i]), fmt(traj.y[i]),
                fmt(traj.u[i]), fmt(traj.w[i]), fmt(traj.r_plus[i]),
                fmt(traj.r_minus[i]), vb, fmt(traj.cum_cost[i]),
                fmt(traj.cum_dist[i]),
            ]) + "\n")


# ---------------------------------------------------------------------------
# adversarial disturbance search


@dataclass(frozen=True)
class SearchSettings:
    """Candidate families and budget for the falsification probe."""

    budget: int = 10_000
    seed: int = 0
    levels: tuple = (0.25, 0.5, 1.0, 2.0)
    block_periods: tuple = (1, 2, 5, 10, 25)
    random_bound: float = 1.5
    include_greedy: bool = True


def _rollout_value(policy: Policy, w_seq, x0: float, gamma: float) -> float:
    """Max over prefixes of cum_cost - gamma^2 cum_dist; lean inner loop."""
    g2 = gamma * gamma
    x = float(x0)
    state = InfoState((0.0, 0.0), abs(x))
    acc = 0.0
    best = -math.inf
    for t, w in enumerate(w_seq):
        if abs(x) > DIVERGENCE_GUARD:
            break
        y = abs(x)
        u = policy(state, t)
        acc += x * x + u * u - g2 * w * w
        if acc > best:
            best = acc
        x = x + u + w
        if t + 1 < len(w_seq):
            state = update_magnitude(state, u, abs(x), gamma)
    return best


def _greedy_candidates(policy: Policy, x0: float, gamma: float, n: int):
    """Adaptive rules rolled out against the policy, returned as sequences."""
    g2 = gamma * gamma
    rules = []
    for alpha in (0.5, 1.0):
        for sign in (1.0, -1.0):
            rules.append(("push", sign * alpha))
    rules.append(("flip", 1.0))
    for kind, par in rules:
        x = float(x0)
        state = InfoState((0.0, 0.0), abs(x))
        w_seq = np.zeros(n + 1)
        for t in range(n + 1):
            if abs(x) > DIVERGENCE_GUARD:
                break
            u = policy(state, t)
            if kind == "push":
                # maximizes (x+u+w)^2 - gamma^2 w^2 over w, scaled by |par|
                w = par * (x + u) / (g2 - 1.0)
                if x + u == 0.0 and t == 0:
                    w = par  # kick a resting state
            else:
                w = -2.0 * x - u  # mirror the state across zero
            w_seq[t] = w
            x = x + u + w
            if t < n:
                state = update_magnitude(state, u, abs(x), gamma)
        yield w_seq


def adversarial_search(system: Optional[SystemModel], policy: Policy,
                       x0: float, gamma: float, n: int,
                       settings: Optional[SearchSettings] = None):
    """Search candidate disturbance families for gain-bound violations.

    Evaluates up to ``settings.budget`` candidate sequences (zeros,
    constants, impulses, switching blocks, greedy closed-loop rules, then
    seeded random sequences) and returns ``(w_seq, value)`` for the
    candidate maximizing the prefix-wise cum_cost - gamma^2 cum_dist.
    Deterministic for a fixed seed.  This is a falsification probe, not an
    exact worst case.
    """
    _require_integrator(system)
    if n < 0:
        raise ValueError(f"horizon must be nonnegative, got {n!r}")
    settings = settings or SearchSettings()
    if settings.budget < 1:
        raise ValueError("candidate budget must be at least 1")

    def candidates():
        yield np.zeros(n + 1)
        for c in settings.levels:
            for s in (1.0, -1.0):
                yield np.full(n + 1, s * c)
        for c in settings.levels:
            for s in (1.0, -1.0):
                w = np.zeros(n + 1)
                w[0] = s * c
                yield w
        for c in settings.levels:
            for period in settings.block_periods:
                blocks = (np.arange(n + 1) // period) % 2
                yield c * np.where(blocks == 0, 1.0, -1.0)
        if settings.include_greedy:
            yield from _greedy_candidates(policy, x0, gamma, n)
        rng = np.random.default_rng(settings.seed)
        while True:
            yield rng.uniform(-settings.random_bound, settings.random_bound, n + 1)

    best_w = None
    best_val = -math.inf
    count = 0
    for w_seq in candidates():
        val = _rollout_value(policy, w_seq, x0, gamma)
        if val > best_val:
            best_val = val
            best_w = np.array(w_seq, dtype=float)
        count += 1
        if count >= settings.budget:
            break
    return best_w, best_val
