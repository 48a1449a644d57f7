"""Closed-form gain certificate for the magnitude-measured integrator.

A :class:`Certificate` holds (gamma, p, q, k).  The candidate value bound

    vbar(r, y) = max( p y^2 + r+,  p y^2 + r-,  q y^2 + (r+ + r-)/2 )

dominates the optimal value whenever three scalar inequalities on
(p, q, k) hold, and then the sign controller with relative gain k keeps
vbar non-increasing along every closed-loop trajectory, which bounds the
closed-loop l2-gain by gamma with bias q*x0^2.

``closed_form_bellman`` evaluates the controller-fixed Bellman backup of
vbar exactly (maximization over the next measurement done analytically);
``check_dissipation`` verifies the resulting one-step decrease on sample
batches and cross-checks the closed form against a dense numerical
maximization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import InfeasibleStateError
from .istate import NEG_INF, InfoState, update_magnitude

__all__ = [
    "Certificate",
    "default_certificate",
    "vbar",
    "check_inequalities",
    "closed_form_bellman",
    "numeric_bellman_u",
    "check_dissipation",
    "DissipationReport",
]


@dataclass(frozen=True)
class Certificate:
    """Gain-bound parameters; requires 0 < p <= q < gamma^2."""

    gamma: float
    p: float
    q: float
    k: float

    def __post_init__(self):
        g2 = self.gamma * self.gamma
        if not (self.gamma > 0 and 0 < self.p <= self.q < g2):
            raise ValueError(
                f"certificate requires 0 < p <= q < gamma^2, got "
                f"p={self.p!r}, q={self.q!r}, gamma^2={g2!r}"
            )


def default_certificate() -> Certificate:
    """The reference parameter tuple (4, 1.7, 7, 0.7)."""
    return Certificate(gamma=4.0, p=1.7, q=7.0, k=0.7)


def vbar(r, y: float, cert: Certificate) -> float:
    """Three-branch upper bound at hypothesis costs r = (r+, r-)."""
    rp, rm = r
    if rp == NEG_INF and rm == NEG_INF:
        raise InfeasibleStateError("both hypothesis entries are -inf")
    yy = y * y
    return max(cert.p * yy + rp, cert.p * yy + rm, cert.q * yy + (rp + rm) / 2)


def _inv_gaps(cert: Certificate) -> Tuple[float, float]:
    g2 = cert.gamma * cert.gamma
    cp = 1.0 / cert.p - 1.0 / g2
    cq = 1.0 / cert.q - 1.0 / g2
    if cp <= 0 or cq <= 0:
        raise ValueError("certificate parameters must satisfy p, q < gamma^2")
    return cp, cq


def check_inequalities(cert: Certificate):
    """Margins of the three parameter inequalities; all must be positive.

    Returns ``(satisfied, (m1, m2, m3))`` where

        m1 = p - [1 + k^2 + (1-k)^2 / (1/p - 1/gamma^2)]
        m2 = q - [1 + k^2 + (1+k)^2 / (1/p - 1/gamma^2)]
        m3 = q - [1 + k^2 + 1/(1/q - 1/gamma^2) - gamma^2 k^2]
    """
    cp, cq = _inv_gaps(cert)
    k = cert.k
    g2 = cert.gamma * cert.gamma
    base = 1.0 + k * k
    r1 = base + (1.0 - k) ** 2 / cp
    r2 = base + (1.0 + k) ** 2 / cp
    r3 = base + 1.0 / cq - g2 * k * k
    margins = (cert.p - r1, cert.q - r2, cert.q - r3)
    return all(m > 0 for m in margins), margins


def closed_form_bellman(r, y: float, u: float, cert: Certificate):
    """Exact backup of vbar for a fixed control u.

    Returns ``(b_pm, b_mixed, total)``:

    * ``b_pm`` backs up the two pure branches p y^2 + r+-; the inner
      maximization over the next measurement peaks at the zero-penalty
      point of one sign, leaving (y +- u)^2 / (1/p - 1/gamma^2).
    * ``b_mixed`` backs up the averaged branch; the same-hypothesis terms
      pin the next measurement at zero while the cross term peaks at
      y^2 / (1/q - 1/gamma^2) - gamma^2 u^2.
    * ``total`` is their max: the full backup of the three-branch bound.
    """
    rp, rm = r
    if rp == NEG_INF and rm == NEG_INF:
        raise InfeasibleStateError("both hypothesis entries are -inf")
    cp, cq = _inv_gaps(cert)
    g2 = cert.gamma * cert.gamma
    base = y * y + u * u
    b_pm = base + max((y + u) ** 2 / cp + rp, (y - u) ** 2 / cp + rm)
    a_pp = rp - g2 * (u + y) ** 2
    a_mm = rm - g2 * (u - y) ** 2
    mixed = y * y / cq - g2 * u * u + (rp + rm) / 2
    b_mixed = base + max(a_pp, a_mm, mixed)
    return b_pm, b_mixed, max(b_pm, b_mixed)


def _vbar_after_update(rp, rm, y, u, v, cert: Certificate):
    """vbar at the updated state, vectorized over a measurement array v."""
    g2 = cert.gamma * cert.gamma
    base = y * y + u * u
    ap = np.maximum(rp - g2 * (v - u - y) ** 2, rm - g2 * (v - u + y) ** 2)
    am = np.maximum(rp - g2 * (-v - u - y) ** 2, rm - g2 * (-v - u + y) ** 2)
    rpn = base + ap
    rmn = base + am
    vv = v * v
    return np.maximum(
        np.maximum(cert.p * vv + rpn, cert.p * vv + rmn),
        cert.q * vv + (rpn + rmn) / 2,
    )


def numeric_bellman_u(r, y: float, u: float, cert: Certificate,
                      n_points: int = 2001, refine_rounds: int = 2):
    """Dense numerical max over the next measurement of the vbar backup.

    Scans ``n_points`` on [0, 2(y + |u|) + 5], then zooms around the
    incumbent maximizer ``refine_rounds`` times so the result resolves
    the quadratic peak to well below 1e-6 relative.  Returns
    ``(value, argmax_v, boundary_active)``.
    """
    rp, rm = r
    if rp == NEG_INF and rm == NEG_INF:
        raise InfeasibleStateError("both hypothesis entries are -inf")
    v_hi = 2.0 * (y + abs(u)) + 5.0
    grid = np.linspace(0.0, v_hi, n_points)
    vals = _vbar_after_update(rp, rm, y, u, grid, cert)
    i = int(np.argmax(vals))
    boundary = i == n_points - 1
    best_v, best = grid[i], vals[i]
    h = v_hi / (n_points - 1)
    for _ in range(refine_rounds):
        local = np.clip(np.linspace(best_v - h, best_v + h, 201), 0.0, v_hi)
        lv = _vbar_after_update(rp, rm, y, u, local, cert)
        j = int(np.argmax(lv))
        if lv[j] > best:
            best, best_v = lv[j], local[j]
        h /= 100.0
    return float(best), float(best_v), boundary


@dataclass
class DissipationReport:
    """Outcome of a batch dissipation check."""

    certificate: Certificate
    satisfied: bool
    margins: Tuple[float, float, float]
    n_samples: int
    n_violations: int
    worst_violation: float
    worst_sample: tuple
    cross_checked: bool
    max_cross_error: float
    n_boundary: int

    @property
    def passed(self) -> bool:
        return (self.satisfied and self.n_violations == 0
                and (not self.cross_checked or self.max_cross_error <= 1e-6))

    def format_text(self) -> str:
        c = self.certificate
        lines = [
            f"certificate gamma={c.gamma} p={c.p} q={c.q} k={c.k}",
            f"inequality margins: {self.margins[0]:.6g} {self.margins[1]:.6g} "
            f"{self.margins[2]:.6g} (satisfied: {self.satisfied})",
            f"samples checked: {self.n_samples}",
            f"dissipation violations: {self.n_violations}",
            f"worst violation: {self.worst_violation:.6g}",
        ]
        if self.worst_sample is not None:
            lines.append(f"worst sample (r+, r-, y): {self.worst_sample}")
        if self.cross_checked:
            lines.append(f"max closed-form vs numeric error: {self.max_cross_error:.3g}")
            lines.append(f"numeric maxima on scan boundary: {self.n_boundary}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)

    def csv_rows(self):
        yield ("metric", "value")
        yield ("margin_1", repr(self.margins[0]))
        yield ("margin_2", repr(self.margins[1]))
        yield ("margin_3", repr(self.margins[2]))
        yield ("satisfied", str(self.satisfied).lower())
        yield ("n_samples", str(self.n_samples))
        yield ("n_violations", str(self.n_violations))
        yield ("worst_violation", repr(self.worst_violation))
        yield ("max_cross_error", repr(self.max_cross_error))
        yield ("passed", str(self.passed).lower())


def check_dissipation(cert: Certificate, samples: Iterable, *,
                      tie_sign: float = 1.0, tol: float = 1e-9,
                      cross_check: bool = True, n_points: int = 2001,
                      refine_rounds: int = 2,
                      chunk: int = 1024) -> DissipationReport:
    """Verify the one-step decrease of vbar under the sign controller.

    ``samples`` is a sequence of ``((r+, r-), y)`` with finite entries and
    y >= 0.  For each sample, u = k * sign(r- - r+) * y (ties toward
    ``tie_sign``) and the closed-form backup must not exceed
    ``vbar + tol``.  When ``cross_check`` is set, the closed form is also
    compared against the dense numerical maximization (relative error with
    absolute floor 1).
    """
    rps, rms, ys = [], [], []
    for (rp, rm), y in samples:
        rps.append(rp)
        rms.append(rm)
        ys.append(y)
    rp = np.asarray(rps, dtype=float)
    rm = np.asarray(rms, dtype=float)
    y = np.asarray(ys, dtype=float)
    if (y < 0).any():
        raise ValueError("sample measurements must be nonnegative")
    if not (np.isfinite(rp).all() and np.isfinite(rm).all()):
        raise ValueError("sample hypothesis costs must be finite")
    n = len(y)

    cp, cq = _inv_gaps(cert)
    g2 = cert.gamma * cert.gamma
    k = cert.k
    s = np.where(rm > rp, 1.0, np.where(rm < rp, -1.0, tie_sign))
    u = k * s * y

    base = y * y + u * u
    b_pm = base + np.maximum((y + u) ** 2 / cp + rp, (y - u) ** 2 / cp + rm)
    mixed = y * y / cq - g2 * u * u + (rp + rm) / 2
    b_mixed = base + np.maximum(
        np.maximum(rp - g2 * (u + y) ** 2, rm - g2 * (u - y) ** 2), mixed
    )
    total = np.maximum(b_pm, b_mixed)

    yy = y * y
    vb = np.maximum(
        np.maximum(cert.p * yy + rp, cert.p * yy + rm),
        cert.q * yy + (rp + rm) / 2,
    )
    violation = total - vb
    bad = violation > tol
    n_violations = int(bad.sum())
    if n:
        iw = int(np.argmax(violation))
        worst = float(violation[iw])
        worst_sample = (float(rp[iw]), float(rm[iw]), float(y[iw]))
    else:
        worst, worst_sample = NEG_INF, None

    max_cross = 0.0
    n_boundary = 0
    if cross_check and n:
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            num, bnd = _numeric_batch(rp[lo:hi], rm[lo:hi], y[lo:hi], u[lo:hi],
                                      cert, n_points, refine_rounds)
            err = np.abs(num - total[lo:hi]) / np.maximum(1.0, np.abs(total[lo:hi]))
            max_cross = max(max_cross, float(err.max()))
            n_boundary += int(bnd.sum())

    satisfied, margins = check_inequalities(cert)
    return DissipationReport(
        certificate=cert,
        satisfied=satisfied,
        margins=margins,
        n_samples=n,
        n_violations=n_violations,
        worst_violation=worst,
        worst_sample=worst_sample,
        cross_checked=bool(cross_check and n),
        max_cross_error=max_cross,
        n_boundary=n_boundary,
    )


def _numeric_batch(rp, rm, y, u, cert, n_points, refine_rounds):
    """Chunk-vectorized dense maximization matching numeric_bellman_u."""
    v_hi = 2.0 * (y + np.abs(u)) + 5.0
    frac = np.linspace(0.0, 1.0, n_points)
    V = v_hi[:, None] * frac[None, :]
    vals = _vbar_after_update(rp[:, None], rm[:, None], y[:, None], u[:, None], V, cert)
    idx = np.argmax(vals, axis=1)
    rows = np.arange(len(y))
    best = vals[rows, idx]
    best_v = V[rows, idx]
    boundary = idx == n_points - 1
    h = v_hi / (n_points - 1)
    off = np.linspace(-1.0, 1.0, 201)
    for _ in range(refine_rounds):
        local = np.clip(best_v[:, None] + h[:, None] * off[None, :],
                        0.0, v_hi[:, None])
        lv = _vbar_after_update(rp[:, None], rm[:, None], y[:, None], u[:, None],
                                local, cert)
        j = np.argmax(lv, axis=1)
        lb = lv[rows, j]
        take = lb > best
        best = np.where(take, lb, best)
        best_v = np.where(take, local[rows, j], best_v)
        h = h / 100.0
    return best, boundary
