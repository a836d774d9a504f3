"""Slow, independent solvers used to validate the closed-form kernels and ADMM.

Nothing here imports the kernels or the ADMM driver: agreement between
the two paths is evidence, not tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import PicmvProblem, min_feasible_eps


def _prox_obj(a, b, alpha, beta, x, y):
    return a * np.abs(x) ** 2 + np.real(np.conj(b) * x) + alpha * y**2 + beta * y


def prox_grid_oracle(a, b, c, d, alpha, beta, delta, resolution=64, levels=6, y_span=None):
    """Grid search for ``min a|x|^2 + Re{conj(b) x} + alpha y^2 + beta y``
    over ``|x - d| + delta y <= c``.

    ``x = d + r e^{j phi}`` is gridded in polar coordinates; for every grid
    point the best ``y`` is the clipped scalar quadratic minimizer (or, for
    ``delta == 0``, ``-beta / (2 alpha)``).  The grid is re-centred and shrunk
    ``levels`` times around the incumbent.  Returns ``(x, y, objective, h)``
    with ``h`` the final radial spacing.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if delta == 0:
        if c < 0:
            raise ValueError("infeasible: c < 0 with delta == 0")
        r_lo, r_hi = 0.0, c
    else:
        scale = abs(d) + abs(b) / a + abs(c) + abs(beta) / alpha * delta + 1.0
        r_lo, r_hi = 0.0, scale if y_span is None else y_span
    p_lo, p_hi = 0.0, 2 * np.pi
    best = None
    n = int(resolution)
    for _ in range(levels):
        r = np.linspace(r_lo, r_hi, n + 1)
        ph = np.linspace(p_lo, p_hi, 4 * n, endpoint=False)
        rr, pp = np.meshgrid(r, ph, indexing="ij")
        x = d + rr * np.exp(1j * pp)
        y = np.full(rr.shape, -beta / (2 * alpha))
        if delta > 0:
            y = np.minimum(y, (c - rr) / delta)
        f = _prox_obj(a, b, alpha, beta, x, y)
        i = np.unravel_index(np.argmin(f), f.shape)
        if best is None or f[i] < best[2]:
            best = (complex(x[i]), float(y[i]), float(f[i]), float(rr[i]), float(pp[i]))
        dr = (r_hi - r_lo) / n
        dp = (p_hi - p_lo) / (4 * n)
        h = dr
        r0, p0 = best[3], best[4]
        r_lo, r_hi = max(0.0, r0 - 2 * dr), r0 + 2 * dr
        if delta == 0:
            r_hi = min(r_hi, c)
        p_lo, p_hi = p0 - 2 * dp, p0 + 2 * dp
    return best[0], best[1], best[2], h


def t_objective(table, mu: float, t: np.ndarray) -> np.ndarray:
    """``mu t + sum_phi f_phi(t)`` evaluated piecewise on an array of t."""
    t = np.asarray(t, dtype=float)[:, None]
    first = table.a1 * t**2 + table.b1 * t
    mid = table.a2 * t**2 + table.b2 * t + table.c2
    f = np.where(t <= table.t1, first, np.where(t <= table.t2, mid, table.c3)).sum(axis=1)
    f = f + mu * t[:, 0]
    return np.where(t[:, 0] < table.lower, np.inf, f)


def t_derivative(table, mu: float, t: float) -> float:
    """``mu + sum_phi f_phi'(t)`` from the per-angle pieces."""
    d1 = 2 * table.a1 * t + table.b1
    d2 = 2 * table.a2 * t + table.b2
    return mu + float(np.sum(np.where(t <= table.t1, d1, np.where(t <= table.t2, d2, 0.0))))


def t_grid_oracle(table, mu: float, t_range=None, resolution: float = 1e-3, refine: int = 3) -> float:
    """Grid argmin of ``mu t + f(t)`` with local zoom passes, then a
    derivative bisection inside the final grid bracket.

    Function values alone cannot resolve the minimizer much below
    ``sqrt(machine eps)`` relative, so the last step bisects on the sign of
    the piecewise derivative.  The default range is
    ``[min breakpoint - 10, max breakpoint + 10]``.
    """
    if t_range is None:
        pts = np.concatenate([table.t1, table.t2])
        t_range = (float(pts.min()) - 10.0, float(pts.max()) + 10.0)
    lo, hi = t_range
    floor = table.lower if np.isfinite(table.lower) else -np.inf
    lo = max(lo, floor)
    n = int(min(np.ceil((hi - lo) / resolution), 20000)) + 1
    step = (hi - lo) / (n - 1)
    best = lo
    for _ in range(refine + 1):
        grid = lo + step * np.arange(n)
        vals = t_objective(table, mu, grid)
        best = float(grid[int(np.argmin(vals))])
        lo = max(best - 2 * step, floor)
        step /= 50.0
        n = 201
    # grow a bracket around the grid incumbent until the derivative changes sign
    width = 1e-9 * max(1.0, abs(best))
    a, b = max(best - width, floor), best + width
    while t_derivative(table, mu, a) >= 0 and a > max(floor, t_range[0]):
        width *= 2
        a = max(best - width, floor, t_range[0])
    if t_derivative(table, mu, a) >= 0:
        return a
    while t_derivative(table, mu, b) < 0 and b < t_range[1]:
        width *= 2
        b = min(best + width, t_range[1])
    if t_derivative(table, mu, b) < 0:
        return b
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if t_derivative(table, mu, m) >= 0:
            b = m
        else:
            a = m
    return 0.5 * (a + b)


@dataclass
class OracleReport:
    objective: float
    w: np.ndarray | None
    eps: np.ndarray | None
    gap: float
    max_violation: float
    found: bool


def _objective_grad(p: PicmvProblem, w: np.ndarray):
    """``w^H R w + mu max_k gamma_k eps_k(w)`` with eps eliminated, and a subgradient."""
    rw = p.R.entries @ w
    val = float(np.real(np.vdot(w, rw)))
    grad = 2 * rw
    inter = p.interference
    if len(inter):
        nw = np.linalg.norm(w)
        gn = w / nw if nw > 0 else np.zeros_like(w)
        ep = inter.steering.conj().T @ w
        lvl = inter.gamma[inter.group] * (np.abs(ep) + p.delta * nw) / inter.c
        j = int(np.argmax(lvl))
        e = ep[j]
        gj = inter.steering[:, j] * (e / abs(e)) if abs(e) > 0 else 0.0
        val += p.mu * float(lvl[j])
        grad = grad + p.mu * inter.gamma[inter.group[j]] / inter.c[j] * (gj + p.delta * gn)
    return val, grad


def _worst_target(p: PicmvProblem, w: np.ndarray):
    """Largest target violation and a subgradient of that constraint."""
    t = p.targets
    nw = np.linalg.norm(w)
    e = t.steering.conj().T @ w - 1.0
    h = np.abs(e) + p.delta * nw - t.c
    i = int(np.argmax(h))
    g = t.steering[:, i] * (e[i] / abs(e[i])) if abs(e[i]) > 0 else np.zeros_like(w)
    if nw > 0:
        g = g + p.delta * w / nw
    return float(h[i]), g


def reference_solve(
    p: PicmvProblem,
    steps: int = 20000,
    step0: float | None = None,
    feas_tol: float = 1e-4,
    restarts: int = 4,
    seed: int = 0,
    w0: np.ndarray | None = None,
    corrections: int = 50,
) -> OracleReport:
    """Switching subgradient method over ``w`` for tiny instances.

    ``eps`` is eliminated as its smallest feasible value for the current
    ``w``, leaving the convex objective ``w^H R w + mu max_k gamma_k eps_k(w)``
    under the target constraints.  Each step moves along the normalized
    objective subgradient with length ``step0 / sqrt(k)``, then applies
    Polyak steps ``h / ||g||^2`` to the worst target constraint until its
    violation drops below ``feas_tol / 10`` (at most ``corrections`` times).
    Restarts shrink the step scale tenfold from the incumbent.  Reports the
    best iterate whose target violation is at most ``feas_tol``.
    """
    m = p.size
    if m > 8 or p.num_constraints > 12:
        raise ValueError("reference_solve is for desk-scale instances only (M <= 8, <= 12 constraints)")
    at = p.targets.steering
    rng = np.random.default_rng(seed)
    if w0 is None:
        w = at @ np.linalg.lstsq(at.conj().T @ at, np.ones(at.shape[1]), rcond=None)[0]
    else:
        w = np.array(w0, dtype=complex)
    s0 = step0 if step0 is not None else 0.5 * max(np.linalg.norm(w), 1.0 / np.sqrt(m))
    target = 0.1 * feas_tol
    best_obj, best_w, best_v = np.inf, None, np.inf

    def correct(w):
        for _ in range(corrections):
            v, g = _worst_target(p, w)
            gg = float(np.real(np.vdot(g, g)))
            if v <= target or gg == 0:
                break
            w = w - (v / gg) * g
        return w, v

    for rs in range(restarts + 1):
        if best_w is not None:
            w = best_w.copy()
        elif rs:
            w = w + s0 * (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2 * m)
        for k in range(steps):
            w, v = correct(w)
            obj, g = _objective_grad(p, w)
            if v <= feas_tol and obj < best_obj:
                best_obj, best_w, best_v = obj, w.copy(), v
            gn = np.linalg.norm(g)
            if gn == 0:
                break
            w = w - (s0 / np.sqrt(k + 1.0)) * g / gn
        s0 *= 0.1
    if best_w is None:
        return OracleReport(np.inf, None, None, np.inf, np.inf, False)
    eps = None
    if len(p.interference):
        eps = min_feasible_eps(p, best_w)
    return OracleReport(best_obj, best_w, eps, 0.0, max(best_v, 0.0), True)


def compare(report: OracleReport, candidate_objective: float) -> float:
    """Relative gap ``(candidate - oracle) / max(|oracle|, 1e-12)``.

    Positive means the candidate is worse than the oracle.
    """
    report.gap = (candidate_objective - report.objective) / max(abs(report.objective), 1e-12)
    return report.gap
