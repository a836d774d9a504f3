"""Closed-form solvers for the ADMM subproblems.

Every kernel is vectorized over angles: scalar arguments broadcast against
arrays, so one call updates all target (or interference) auxiliaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _unit(z: np.ndarray) -> np.ndarray:
    """``z / |z|`` with the convention ``1`` at ``z == 0``."""
    mag = np.abs(z)
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag > 0, z / safe, 1.0 + 0j)


def prox_socp(a, b, c, d, alpha, beta, delta):
    """Minimize ``a|x|^2 + Re{conj(b) x} + alpha y^2 + beta y``
    subject to ``|x - d| + delta y <= c``.

    Requires ``a, alpha > 0`` and ``delta >= 0``.  With ``delta > 0`` any
    real ``c`` is admissible (``y`` is free in sign); with ``delta == 0``
    the constraint only binds ``x`` and needs ``c >= 0``.

    Returns ``(x, y)``.
    """
    a = np.asarray(a, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    c = np.asarray(c, dtype=float)
    delta = np.asarray(delta, dtype=float)
    beta = np.asarray(beta, dtype=float)
    b = np.asarray(b, dtype=complex)
    d = np.asarray(d, dtype=complex)
    if np.any(a <= 0) or np.any(alpha <= 0):
        raise ValueError("a and alpha must be positive")
    if np.any(delta < 0):
        raise ValueError("delta must be >= 0")
    if np.any((delta == 0) & (c < 0)):
        raise ValueError("c must be >= 0 when delta == 0")

    s = 2.0 * a * d + b
    r = np.abs(s) / (2.0 * a)
    e = _unit(s)
    y_free = -beta / (2.0 * alpha)
    y_touch = (2.0 * a * delta * (c - r) - beta) / (2.0 * a * delta**2 + 2.0 * alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        y_cap = np.where(delta > 0, c / np.where(delta > 0, delta, 1.0), np.inf)
    y = np.minimum(np.minimum(y_free, y_touch), y_cap)
    # d - c e + e max(c - r, delta y), arranged to avoid cancellation
    x = d - e * np.minimum(r, np.maximum(c - delta * y, 0.0))
    if x.ndim == 0:
        return complex(x), float(y)
    return x, y


def prox_objective(a, b, alpha, beta, x, y):
    return a * np.abs(x) ** 2 + np.real(np.conj(b) * x) + alpha * y**2 + beta * y


def update_theta(inner, lam, eta, y, rho, delta, c):
    """Target auxiliaries ``(y_theta, z_theta)`` given ``inner = w^H a_theta``."""
    h = rho / 2.0
    b = -np.asarray(lam) - rho * np.asarray(inner)
    beta = -np.asarray(eta) - rho * y
    z, yt = prox_socp(h, b, c, 1.0, h, beta, delta)
    return yt, z


def update_phi(t, b, beta, rho, delta, c, gamma):
    """Interference auxiliaries ``(y_phi, z_phi)`` for a fixed ``t``.

    ``b`` and ``beta`` are the linear coefficients ``-lambda_phi - rho w^H a_phi``
    and ``-eta_phi - rho y``.  Negative ``t`` is only admissible when
    ``delta > 0``.
    """
    if delta == 0 and np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0 when delta == 0")
    h = rho / 2.0
    cap = np.asarray(t) * np.asarray(c) / np.asarray(gamma)
    z, yp = prox_socp(h, b, cap, 0.0, h, beta, delta)
    return yp, z


@dataclass(frozen=True)
class BreakpointTable:
    """Per-angle pieces of ``f_phi(t)``, the optimal value of the
    interference subproblem at a fixed ``t``:

        a1 t^2 + b1 t               for t <= t1
        a2 t^2 + b2 t + c2          for t1 < t <= t2
        c3                          for t > t2

    With ``delta == 0`` the first piece is absent: ``t`` is restricted to
    ``t >= lower = 0`` and ``t1`` is set to 0.
    """

    a1: np.ndarray
    b1: np.ndarray
    a2: np.ndarray
    b2: np.ndarray
    c2: np.ndarray
    c3: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    lower: float = -np.inf

    def __len__(self) -> int:
        return self.a2.size

    @property
    def breakpoints(self) -> np.ndarray:
        """All breakpoints merged in ascending order."""
        if np.isfinite(self.lower):
            return np.sort(self.t2)
        return np.sort(np.concatenate([self.t1, self.t2]))

    def pieces(self, t: float) -> np.ndarray:
        """Per-angle ``f_phi(t)``."""
        first = self.a1 * t**2 + self.b1 * t
        mid = self.a2 * t**2 + self.b2 * t + self.c2
        out = np.where(t <= self.t1, first, np.where(t <= self.t2, mid, self.c3))
        if t < self.lower:
            return np.full_like(out, np.inf)
        return out

    def value(self, t: float) -> float:
        return float(np.sum(self.pieces(t)))

    def slope(self, t: float) -> float:
        """Derivative of ``sum_phi f_phi`` at ``t``."""
        s2 = np.minimum(2 * self.a2 * t + self.b2, 0.0)
        if np.isfinite(self.lower):
            return float(np.sum(s2))
        return float(np.sum(np.minimum(2 * self.a1 * t + self.b1, s2)))


def build_breakpoints(b, beta, rho, delta, c, gamma, a=None, alpha=None) -> BreakpointTable:
    """Coefficients and breakpoints of every ``f_phi``.

    ``a`` and ``alpha`` default to ``rho / 2`` as in the ADMM sweep.
    """
    bm = np.abs(np.atleast_1d(np.asarray(b, dtype=complex)))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    n = bm.size
    a = np.full(n, rho / 2.0) if a is None else np.broadcast_to(np.asarray(a, float), (n,))
    alpha = np.full(n, rho / 2.0) if alpha is None else np.broadcast_to(np.asarray(alpha, float), (n,))
    c = np.broadcast_to(np.asarray(c, dtype=float), (n,))
    g = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
    if np.any(c <= 0) or np.any(g <= 0):
        raise ValueError("c_phi and gamma_k must be positive")
    c3 = -(bm**2) / (4 * a) - beta**2 / (4 * alpha)
    t2 = g * (bm / (2 * a) - delta * beta / (2 * alpha)) / c
    if delta == 0:
        a2 = a * c**2 / g**2
        b2 = -c * bm / g
        c2 = -(beta**2) / (4 * alpha)
        zero = np.zeros(n)
        return BreakpointTable(zero, zero, a2, b2, c2, c3, zero, t2, lower=0.0)
    den = alpha + a * delta**2
    a1 = alpha * c**2 / (g**2 * delta**2)
    b1 = beta * c / (g * delta)
    a2 = alpha * a * c**2 / (g**2 * den)
    b2 = (delta * a * c * beta - alpha * c * bm) / (g * den)
    c2 = -((delta * bm + beta) ** 2) / (4 * den)
    t1 = -g * (bm * delta**2 + beta * delta) / (2 * alpha * c)
    if np.any(t1 > t2 + 1e-12 * (1 + np.abs(t2))):
        raise AssertionError("breakpoint ordering t1 <= t2 violated")
    return BreakpointTable(a1, b1, a2, b2, c2, c3, np.minimum(t1, t2), t2)


def _active_coeffs(table: BreakpointTable, t: float) -> tuple[float, float]:
    """Summed quadratic and linear coefficients of the pieces active at ``t``."""
    first = t <= table.t1 if not np.isfinite(table.lower) else np.zeros(len(table), bool)
    mid = ~first & (t <= table.t2)
    a = float(np.sum(table.a1[first]) + np.sum(table.a2[mid]))
    b = float(np.sum(table.b1[first]) + np.sum(table.b2[mid]))
    return a, b


def solve_t(table: BreakpointTable, mu: float) -> float:
    """Minimize ``mu t + sum_phi f_phi(t)`` over the sorted breakpoints.

    The derivative of the sum is piecewise linear and nondecreasing, so a
    binary search over the sorted breakpoints finds the segment on which
    it crosses ``-mu``; the linear piece there is then solved exactly.
    Coefficients are re-summed per probe rather than carried as running
    sums, which would cancel badly when ``a1 >> a2`` (small ``delta``).
    """
    if len(table) == 0:
        raise ValueError("breakpoint table is empty")
    if mu < 0:
        raise ValueError("mu must be >= 0")
    bounded = np.isfinite(table.lower)
    pts = np.sort(table.t2 if bounded else np.concatenate([table.t1, table.t2]))
    if bounded:
        pts = pts[pts > 0.0]
        pts = np.concatenate([[0.0], pts])

    def deriv(t):
        a, b = _active_coeffs(table, t)
        return 2 * a * t + b

    if deriv(pts[-1]) < -mu:
        # cannot happen for a valid table (slope is 0 past the last t2)
        return float(pts[-1])
    lo, hi = -1, len(pts) - 1  # deriv(pts[hi]) >= -mu; pts[lo] fails (or -inf)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if deriv(pts[mid]) >= -mu:
            hi = mid
        else:
            lo = mid
    right = float(pts[hi])
    if lo < 0:
        if bounded:
            return max(right, 0.0)
        probe = right - 1.0
    else:
        probe = 0.5 * (float(pts[lo]) + right)
    ak, bk = _active_coeffs(table, probe)
    if ak <= 0:
        return right
    t = min(-(bk + mu) / (2 * ak), right)
    if lo >= 0:
        t = max(t, float(pts[lo]))
    return float(max(t, 0.0) if bounded else t)


def solve_wy(u: np.ndarray, lam: np.ndarray, b: np.ndarray, alpha: float, beta: float,
             tol: float = 1e-12, return_branch: bool = False):
    """Minimize ``w^H A w + Re{b^H w} + alpha y^2 + beta y`` s.t. ``||w|| <= y``.

    ``A = U diag(lam) U^H`` must be positive definite.  Three regimes:
    the origin when ``beta >= ||b||``; the unconstrained minimizer when it
    already satisfies the cone; otherwise the cone is active and ``y``
    solves ``sum_i |bb_i|^2 / ((2 lam_i + 2 alpha) y + beta)^2 = 1``
    (``bb = U^H b``) by bisection.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("A must be positive definite")
    b = np.asarray(b, dtype=complex)
    bnorm = np.linalg.norm(b)
    if beta >= bnorm:
        out = (np.zeros_like(b), 0.0)
        return (*out, "zero") if return_branch else out
    bb = u.conj().T @ b
    unc = np.linalg.norm(bb / lam)
    if unc <= -beta / alpha:
        y = -beta / (2 * alpha)
        w = u @ (-bb / (2 * lam))
        return (w, y, "interior") if return_branch else (w, y)
    p = np.abs(bb) ** 2
    k = 2 * lam + 2 * alpha
    lo = max(0.0, -beta / (2 * alpha))
    hi = unc / 2.0
    # f(lo) > 1 >= f(hi); shrink until the bracket stops moving
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol * max(1.0, hi):
            break
        if np.sum(p / (k * mid + beta) ** 2) > 1.0:
            lo = mid
        else:
            hi = mid
    y = 0.5 * (lo + hi)
    w = u @ (-bb / (k + beta / y))
    return (w, y, "boundary") if return_branch else (w, y)


def wy_kkt_residuals(u, lam, b, alpha, beta, w, y):
    """Stationarity and complementary-slackness residuals of a (w, y) pair.

    The cone multiplier is recovered from the y-stationarity condition as
    ``max(2 alpha y + beta, 0)``.
    """
    a = (u * lam[None, :]) @ u.conj().T
    nu = max(2 * alpha * y + beta, 0.0)
    wn = np.linalg.norm(w)
    if wn > 0:
        grad_w = 2 * a @ w + b + nu * w / wn
        stat = np.linalg.norm(grad_w)
        stat_y = abs(2 * alpha * y + beta - nu)
    else:
        # subgradient of nu ||w|| at 0 is the ball of radius nu
        stat = max(np.linalg.norm(b) - nu, 0.0)
        stat_y = max(2 * alpha * y + beta - nu, 0.0)
    comp = nu * abs(wn - y)
    primal = max(wn - y, 0.0)
    scale = max(1.0, np.linalg.norm(b), abs(beta))
    return max(stat, stat_y) / scale, comp / scale, primal
