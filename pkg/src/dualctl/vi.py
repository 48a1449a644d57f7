"""Grid value iteration over the normalized information state.

Any hypothesis-cost pair collapses to (max entry, difference): the value
satisfies V(r, y) = max(r) + W(r_minus - r_plus, y), so only the table
W over (delta, y) is iterated.  Sweeps apply the Bellman step at every
node; the iteration is monotone nondecreasing, declared converged when
the sup-norm change drops below ``tol`` and diverged when any node
exceeds ``value_cap``.

The default delta grid is quadratically spaced: the scale on which the
sign hypothesis resolves shrinks with y^2, so clustering points near
delta = 0 is what keeps small measurements resolved.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .control import Policy
from .errors import GridStateError, InfeasibleStateError
from .istate import NEG_INF, InfoState

__all__ = [
    "ValueGrid",
    "make_value_grid",
    "bellman_u",
    "bellman_step",
    "value_iterate",
    "extract_policy",
    "query_value",
    "write_grid_csv",
    "homogeneity_report",
    "GRID_CSV_HEADER",
]

logger = logging.getLogger(__name__)

GRID_CSV_HEADER = "delta,y,W"

# divergence cap default: 1000 x the reference certificate bound q * y_max^2
DEFAULT_CAP_SCALE = 1000.0 * 7.0


@dataclass
class ValueGrid:
    """Normalized value table plus the grids and iteration metadata."""

    gamma: float
    delta_grid: np.ndarray
    y_grid: np.ndarray
    u_grid: np.ndarray
    v_grid: np.ndarray
    values: np.ndarray  # shape (len(delta_grid), len(y_grid))
    value_cap: float
    tol: float = 1e-6
    iteration: int = 0
    verdict: Optional[str] = None
    residual: float = math.inf
    boundary_fraction: float = 0.0

    @property
    def nodes(self):
        d = np.repeat(self.delta_grid, len(self.y_grid))
        y = np.tile(self.y_grid, len(self.delta_grid))
        return d, y


def _quad_spaced(limit: float, n: int) -> np.ndarray:
    t = np.linspace(-1.0, 1.0, n)
    return limit * np.sign(t) * t * t


def make_value_grid(gamma: float, *, y_max: float = 5.0, n_y: int = 51,
                    delta_max: float = 50.0, n_delta: int = 101,
                    u_scale: float = 1.5, n_u: int = 61, n_v: int = 61,
                    v_max: Optional[float] = None,
                    value_cap: Optional[float] = None, tol: float = 1e-6,
                    delta_spacing: str = "quadratic") -> ValueGrid:
    """Fresh grid with W = 0 (the zero-horizon value after max-shift)."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    if y_max <= 0 or delta_max <= 0:
        raise ValueError("y_max and delta_max must be positive")
    if min(n_y, n_delta, n_u, n_v) < 2:
        raise ValueError("every grid needs at least two points")
    u_max = u_scale * y_max
    if v_max is None:
        v_max = 2.0 * (y_max + u_max)
    if delta_spacing == "quadratic":
        delta_grid = _quad_spaced(delta_max, n_delta)
    elif delta_spacing == "uniform":
        delta_grid = np.linspace(-delta_max, delta_max, n_delta)
    else:
        raise ValueError(f"unknown delta_spacing {delta_spacing!r}")
    if value_cap is None:
        value_cap = DEFAULT_CAP_SCALE * y_max * y_max
    return ValueGrid(
        gamma=float(gamma),
        delta_grid=delta_grid,
        y_grid=np.linspace(0.0, y_max, n_y),
        u_grid=np.linspace(-u_max, u_max, n_u),
        v_grid=np.linspace(0.0, v_max, n_v),
        values=np.zeros((n_delta, n_y)),
        value_cap=float(value_cap),
        tol=float(tol),
    )


def _normalize_query(r, y: float, grid: ValueGrid, warn: bool = True):
    """Collapse (r, y) to (offset, clamped delta, clamped y)."""
    rp, rm = r
    m = max(rp, rm)
    if m == NEG_INF:
        raise InfeasibleStateError("both hypothesis entries are -inf")
    if y < 0:
        raise ValueError(f"measurement must be nonnegative, got {y!r}")
    delta = rm - rp  # +-inf when one entry is infeasible; clamped below
    d = min(max(delta, grid.delta_grid[0]), grid.delta_grid[-1])
    yq = min(y, grid.y_grid[-1])
    if warn and (d != delta or yq != y):
        logger.warning("query (delta=%s, y=%s) clamped to grid range", delta, y)
    return m, d, yq


def bellman_u(grid: ValueGrid, r, y: float, u: float) -> float:
    """Backed-up value of control u: max over next measurements of the
    interpolated value at the updated state.

    The maximization scans the v grid plus the two zero-disturbance
    measurements |u -+ y|.  A maximum on the last v-grid point logs a
    boundary warning.
    """
    m, d, yq = _normalize_query(r, y, grid)
    val, v_at, boundary = _kernels.inner_max_numpy(
        grid.values, grid.delta_grid, grid.y_grid, grid.v_grid, grid.gamma,
        d, yq, u)
    if boundary:
        logger.warning(
            "inner maximum sits on the v-grid boundary (v=%g) at "
            "(delta=%g, y=%g, u=%g); widen v_max", v_at, d, yq, u)
    return m + val


def bellman_step(grid: ValueGrid, r, y: float):
    """Minimize :func:`bellman_u` over the control candidates.

    Returns ``(value, u)``; ties prefer smaller |u|, then positive u.
    """
    m, d, yq = _normalize_query(r, y, grid)
    vals, us, _ = _kernels.bellman_nodes(
        grid.values, grid.delta_grid, grid.y_grid, grid.u_grid, grid.v_grid,
        grid.gamma, np.array([d]), np.array([yq]))
    return m + float(vals[0]), float(us[0])


def value_iterate(grid: ValueGrid, max_iters: int = 200,
                  tol: Optional[float] = None,
                  backend: Optional[str] = None,
                  sweep_callback: Optional[Callable] = None):
    """Iterate Bellman sweeps until convergence, divergence, or the cap.

    Returns ``(grid', verdict)`` with verdict in {"converged", "diverged",
    "iteration-capped"}; the input grid is not mutated.  Sweeps must be
    pointwise nondecreasing (a structural property of the candidate-set
    construction); a decrease beyond roundoff slack raises RuntimeError.
    ``sweep_callback(k, values)`` is invoked after each sweep.
    """
    tol = grid.tol if tol is None else float(tol)
    nd, ny = grid.values.shape
    nodes_d, nodes_y = grid.nodes
    values = grid.values.copy()
    verdict = "iteration-capped"
    residual = math.inf
    boundary_fraction = 0.0
    iteration = grid.iteration
    for _ in range(max_iters):
        flat, _, bnd = _kernels.bellman_nodes(
            values, grid.delta_grid, grid.y_grid, grid.u_grid, grid.v_grid,
            grid.gamma, nodes_d, nodes_y, backend=backend)
        new = flat.reshape(nd, ny)
        iteration += 1
        step = new - values
        residual = float(np.max(np.abs(step)))
        slack = 1e-9 * (1.0 + float(np.max(np.abs(new))))
        worst_drop = float(step.min())
        if worst_drop < -slack:
            raise RuntimeError(
                f"sweep {iteration} decreased a node value by {-worst_drop:g}; "
                "the iteration must be monotone"
            )
        values = new
        boundary_fraction = float(bnd.mean())
        if sweep_callback is not None:
            sweep_callback(iteration, values)
        if float(values.max()) > grid.value_cap:
            verdict = "diverged"
            break
        if residual < tol:
            verdict = "converged"
            break
    if verdict == "converged" and boundary_fraction > 0:
        logger.warning(
            "converged with %.1f%% of nodes maximizing on the v-grid "
            "boundary; widen v_max", 100.0 * boundary_fraction)
    out = replace(grid, values=values, iteration=iteration, verdict=verdict,
                  residual=residual, boundary_fraction=boundary_fraction,
                  tol=tol)
    return out, verdict


def query_value(grid: ValueGrid, r, y: float) -> float:
    """Reconstructed value max(r) + W(delta, y) at an arbitrary state."""
    m, d, yq = _normalize_query(r, y, grid)
    return m + float(_kernels.interp_table(
        grid.values, grid.delta_grid, grid.y_grid, d, yq))


def extract_policy(grid: ValueGrid) -> Policy:
    """Greedy policy of a converged grid: the Bellman-step minimizer."""
    if grid.verdict != "converged":
        raise GridStateError(
            f"policy extraction requires a converged grid, verdict is "
            f"{grid.verdict!r}"
        )

    def fn(state: InfoState, t: int) -> float:
        return bellman_step(grid, state.r, state.y)[1]

    return Policy(name="vi", fn=fn, uses_info_state=True)


def write_grid_csv(grid: ValueGrid, path):
    """Dump the table as ``delta,y,W`` rows in delta-major order."""
    with open(path, "w") as fh:
        fh.write(GRID_CSV_HEADER + "\n")
        for i, d in enumerate(grid.delta_grid):
            for j, y in enumerate(grid.y_grid):
                fh.write(f"{format(float(d), '.17g')},"
                         f"{format(float(y), '.17g')},"
                         f"{format(float(grid.values[i, j]), '.17g')}\n")


def homogeneity_report(grid: ValueGrid, alphas=(0.5, 2.0)) -> dict:
    """Relative deviation of the scaling identity V(a^2 r, a y) = a^2 V(r, y).

    Sampled at interior nodes whose scaled images stay on the grid.  The
    exact operator satisfies the identity; the report quantifies how much
    the fixed grids break it.
    """
    out = {"alphas": {}, "max_rel_dev": 0.0}
    interp = _kernels.interp_table
    for alpha in alphas:
        devs = []
        for d in grid.delta_grid[1:-1]:
            for y in grid.y_grid[1:-1]:
                if y == 0:
                    continue
                d2, y2 = alpha * alpha * d, alpha * y
                if not (grid.delta_grid[0] <= d2 <= grid.delta_grid[-1]
                        and y2 <= grid.y_grid[-1]):
                    continue
                lhs = float(interp(grid.values, grid.delta_grid, grid.y_grid,
                                   d2, y2))
                rhs = alpha * alpha * float(interp(
                    grid.values, grid.delta_grid, grid.y_grid, d, y))
                devs.append(abs(lhs - rhs) / max(1.0, abs(rhs)))
        if devs:
            stats = {"n": len(devs), "max": float(np.max(devs)),
                     "mean": float(np.mean(devs))}
            out["alphas"][alpha] = stats
            out["max_rel_dev"] = max(out["max_rel_dev"], stats["max"])
    return out
