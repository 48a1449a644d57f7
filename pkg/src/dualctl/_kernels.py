"""Bellman-step kernels over the normalized (delta, y) grid.

Two implementations of the same sweep: a numba ``@njit`` kernel (parallel
over nodes) and a vectorized pure-numpy fallback.  The active backend is
chosen by the ``DUALCTL_BACKEND`` environment variable: ``numba`` (the
default when importable), ``numpy``, or ``auto``.

Per node (delta, y) the normalized hypothesis costs are
(-max(delta, 0), min(delta, 0)).  The control candidates are the fixed
u grid plus the same grid rescaled by y / y_max, so the relative-gain
controls the game's scaling symmetry favors stay available at every
amplitude.  The measurement candidates are the fixed v grid plus the two
zero-disturbance measurements |u - y| and |u + y|; with those anchors a
sweep never decreases any node value, which keeps the iteration monotone
the way the exact operator is.  Interpolation of the stored table is
linear in delta and linear in y^2 (exact on quadratic profiles), with
out-of-range queries clamped to the table edge.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["BACKEND", "HAVE_NUMBA", "bellman_nodes", "bellman_nodes_numpy",
           "interp_table", "inner_max_numpy"]


def _resolve_backend() -> tuple:
    flag = os.environ.get("DUALCTL_BACKEND", "auto").strip().lower() or "auto"
    if flag not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"DUALCTL_BACKEND must be 'auto', 'numba', or 'numpy', got {flag!r}"
        )
    try:
        import numba  # noqa: F401
        have = True
    except ImportError:
        have = False
    if flag == "numba" and not have:
        raise ImportError("DUALCTL_BACKEND=numba but numba is not importable")
    if flag == "numpy":
        return "numpy", have
    return ("numba" if have else "numpy"), have


BACKEND, HAVE_NUMBA = _resolve_backend()


# ---------------------------------------------------------------------------
# numpy path


def _cells(grid: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.clip(np.searchsorted(grid, q, side="right") - 1, 0, len(grid) - 2)


def interp_table(table: np.ndarray, d_grid: np.ndarray, y_grid: np.ndarray,
                 dq, yq) -> np.ndarray:
    """Interpolate the (delta, y) table: linear in delta, linear in y^2.

    Queries are clamped to the grid rectangle.
    """
    dq = np.clip(np.asarray(dq, dtype=float), d_grid[0], d_grid[-1])
    yq = np.clip(np.asarray(yq, dtype=float), y_grid[0], y_grid[-1])
    ix = _cells(d_grid, dq)
    tx = np.clip((dq - d_grid[ix]) / (d_grid[ix + 1] - d_grid[ix]), 0.0, 1.0)
    iy = _cells(y_grid, yq)
    yl = y_grid[iy]
    yh = y_grid[iy + 1]
    ty = np.clip((yq * yq - yl * yl) / (yh * yh - yl * yl), 0.0, 1.0)
    return ((1 - tx) * ((1 - ty) * table[ix, iy] + ty * table[ix, iy + 1])
            + tx * ((1 - ty) * table[ix + 1, iy] + ty * table[ix + 1, iy + 1]))


def _backup_values(table, d_grid, y_grid, gamma, rp, rm, y, u, v):
    """Value of the updated state at measurement array v (broadcasting)."""
    g2 = gamma * gamma
    ap = np.maximum(rp - g2 * (v - u - y) ** 2, rm - g2 * (v - u + y) ** 2)
    am = np.maximum(rp - g2 * (-v - u - y) ** 2, rm - g2 * (-v - u + y) ** 2)
    m = y * y + u * u + np.maximum(ap, am)
    return m + interp_table(table, d_grid, y_grid, am - ap, v)


def inner_max_numpy(table, d_grid, y_grid, v_grid, gamma, d, y, u):
    """Max over v grid plus zero-disturbance anchors for one (node, u).

    Returns ``(value, v_at_max, boundary_active)`` where the flag marks a
    maximum attained at the last v-grid point.
    """
    rp = -max(d, 0.0)
    rm = min(d, 0.0)
    v = np.concatenate([v_grid, [abs(u - y), abs(u + y)]])
    vals = _backup_values(table, d_grid, y_grid, gamma, rp, rm, y, u, v)
    i = int(np.argmax(vals))
    return float(vals[i]), float(v[i]), i == len(v_grid) - 1


def bellman_nodes_numpy(table, d_grid, y_grid, u_grid, v_grid, gamma, nodes_d,
                        nodes_y):
    """Full Bellman step at arbitrary nodes; pure-numpy implementation.

    Returns ``(values, controls, boundary)`` arrays over the nodes.
    Ties in the control minimization prefer smaller |u|, then positive u.
    """
    nodes_d = np.asarray(nodes_d, dtype=float)
    nodes_y = np.asarray(nodes_y, dtype=float)
    rp = -np.maximum(nodes_d, 0.0)[:, None]
    rm = np.minimum(nodes_d, 0.0)[:, None]
    y = nodes_y[:, None]
    y_ref = y_grid[-1]
    nv = len(v_grid)

    best = np.full(len(nodes_d), np.inf)
    best_u = np.full(len(nodes_d), np.inf)
    best_bnd = np.zeros(len(nodes_d), dtype=bool)
    for a in range(2 * len(u_grid)):
        if a < len(u_grid):
            u = np.full((len(nodes_d), 1), u_grid[a])
        else:
            u = (u_grid[a - len(u_grid)] / y_ref) * y
        v = np.concatenate([
            np.broadcast_to(v_grid, (len(nodes_d), nv)),
            np.abs(u - y), np.abs(u + y),
        ], axis=1)
        vals = _backup_values(table, d_grid, y_grid, gamma, rp, rm, y, u, v)
        arg = np.argmax(vals, axis=1)
        bu = vals[np.arange(len(vals)), arg]
        uc = u[:, 0]
        take = (bu < best) | (
            (bu == best) & (
                (np.abs(uc) < np.abs(best_u))
                | ((np.abs(uc) == np.abs(best_u)) & (uc > best_u))
            )
        )
        best = np.where(take, bu, best)
        best_u = np.where(take, uc, best_u)
        best_bnd = np.where(take, arg == nv - 1, best_bnd)
    return best, best_u, best_bnd


# ---------------------------------------------------------------------------
# numba path

if HAVE_NUMBA:
    from numba import njit, prange

    @njit(parallel=True)
    def _bellman_nodes_numba(table, d_grid, y_grid, u_grid, v_grid, gamma,
                             nodes_d, nodes_y, out_v, out_u, out_b):
        nd = d_grid.shape[0]
        ny = y_grid.shape[0]
        nu = u_grid.shape[0]
        nv = v_grid.shape[0]
        g2 = gamma * gamma
        y_ref = y_grid[ny - 1]
        for node in prange(nodes_d.shape[0]):
            d = nodes_d[node]
            y = nodes_y[node]
            rp = -max(d, 0.0)
            rm = min(d, 0.0)
            yy = y * y
            best = np.inf
            best_u = np.inf
            best_bnd = False
            for a in range(2 * nu):
                if a < nu:
                    u = u_grid[a]
                else:
                    u = u_grid[a - nu] * y / y_ref
                bu = -np.inf
                argv = 0
                for b in range(nv + 2):
                    if b < nv:
                        v = v_grid[b]
                    elif b == nv:
                        v = abs(u - y)
                    else:
                        v = abs(u + y)
                    t1 = v - u - y
                    t2 = v - u + y
                    t3 = -v - u - y
                    t4 = -v - u + y
                    ap = max(rp - g2 * t1 * t1, rm - g2 * t2 * t2)
                    am = max(rp - g2 * t3 * t3, rm - g2 * t4 * t4)
                    m = yy + u * u + max(ap, am)
                    dq = am - ap
                    if dq < d_grid[0]:
                        dq = d_grid[0]
                    elif dq > d_grid[nd - 1]:
                        dq = d_grid[nd - 1]
                    vq = v
                    if vq < y_grid[0]:
                        vq = y_grid[0]
                    elif vq > y_grid[ny - 1]:
                        vq = y_grid[ny - 1]
                    lo = 0
                    hi = nd - 1
                    while hi - lo > 1:
                        mid = (lo + hi) // 2
                        if d_grid[mid] <= dq:
                            lo = mid
                        else:
                            hi = mid
                    ix = lo
                    tx = (dq - d_grid[ix]) / (d_grid[ix + 1] - d_grid[ix])
                    if tx < 0.0:
                        tx = 0.0
                    elif tx > 1.0:
                        tx = 1.0
                    lo = 0
                    hi = ny - 1
                    while hi - lo > 1:
                        mid = (lo + hi) // 2
                        if y_grid[mid] <= vq:
                            lo = mid
                        else:
                            hi = mid
                    iy = lo
                    yl = y_grid[iy]
                    yh = y_grid[iy + 1]
                    ty = (vq * vq - yl * yl) / (yh * yh - yl * yl)
                    if ty < 0.0:
                        ty = 0.0
                    elif ty > 1.0:
                        ty = 1.0
                    wq = ((1 - tx) * ((1 - ty) * table[ix, iy]
                                      + ty * table[ix, iy + 1])
                          + tx * ((1 - ty) * table[ix + 1, iy]
                                  + ty * table[ix + 1, iy + 1]))
                    val = m + wq
                    if val > bu:
                        bu = val
                        argv = b
                take = bu < best
                if bu == best:
                    if abs(u) < abs(best_u) or (abs(u) == abs(best_u)
                                                and u > best_u):
                        take = True
                if take:
                    best = bu
                    best_u = u
                    best_bnd = argv == nv - 1
            out_v[node] = best
            out_u[node] = best_u
            out_b[node] = best_bnd


def bellman_nodes(table, d_grid, y_grid, u_grid, v_grid, gamma, nodes_d,
                  nodes_y, backend: str | None = None):
    """Dispatch the Bellman step to the selected backend."""
    backend = backend or BACKEND
    if backend == "numpy":
        return bellman_nodes_numpy(table, d_grid, y_grid, u_grid, v_grid,
                                   gamma, nodes_d, nodes_y)
    if backend != "numba":
        raise ValueError(f"unknown backend {backend!r}")
    if not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable")
    nodes_d = np.ascontiguousarray(nodes_d, dtype=float)
    nodes_y = np.ascontiguousarray(nodes_y, dtype=float)
    out_v = np.empty(len(nodes_d))
    out_u = np.empty(len(nodes_d))
    out_b = np.zeros(len(nodes_d), dtype=np.bool_)
    _bellman_nodes_numba(np.ascontiguousarray(table, dtype=float),
                         np.ascontiguousarray(d_grid, dtype=float),
                         np.ascontiguousarray(y_grid, dtype=float),
                         np.ascontiguousarray(u_grid, dtype=float),
                         np.ascontiguousarray(v_grid, dtype=float),
                         float(gamma), nodes_d, nodes_y, out_v, out_u, out_b)
    return out_v, out_u, out_b
