"""ADMM solver for the P-ICMV problem.

Variables are split as x1 = (w, y), x2 = {(y_th, z_th)} and
x3 = (t, {(y_ph, z_ph)}), with consensus constraints z = w^H a and
y_aux = y.  Each sweep solves the three blocks in closed form and then
takes a dual ascent step on the multipliers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .kernels import build_breakpoints, solve_t, solve_wy, update_phi, update_theta
from .problem import PicmvProblem, min_feasible_eps

log = logging.getLogger(__name__)

PD_RTOL = 1e-12


class SolverDivergedError(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


def default_rho(mu: float) -> float:
    return 10.0 * mu if mu > 0 else 100.0


@dataclass
class AdmmState:
    w: np.ndarray
    y: float
    t: float
    y_th: np.ndarray
    z_th: np.ndarray
    y_ph: np.ndarray
    z_ph: np.ndarray
    lam_th: np.ndarray
    eta_th: np.ndarray
    lam_ph: np.ndarray
    eta_ph: np.ndarray
    rho: float
    u: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    iteration: int = 0
    primal: float = np.inf
    dual: float = np.inf

    def copy(self) -> AdmmState:
        arrays = {k: np.array(v) for k, v in vars(self).items() if isinstance(v, np.ndarray) and k not in ("u", "lam")}
        return replace(self, **arrays)


@dataclass
class Beamformer:
    w: np.ndarray
    eps: np.ndarray
    eps_lower: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    t: float = 0.0
    y: float = 0.0
    history: list = field(default_factory=list, repr=False)
    infeasible_suspected: bool = False
    state: AdmmState | None = field(default=None, repr=False)


def assemble_a(p: PicmvProblem, rho: float) -> np.ndarray:
    at, ap = p.targets.steering, p.interference.steering
    return p.R.entries + 0.5 * rho * (at @ at.conj().T + ap @ ap.conj().T)


def init_state(p: PicmvProblem, rho: float, warm: AdmmState | None = None) -> AdmmState:
    """Zero state (or a copy of ``warm``) with ``A`` assembled and factorized."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    a = assemble_a(p, rho)
    lam, u = np.linalg.eigh(a)
    if lam[0] <= PD_RTOL * max(lam[-1], 0.0):
        raise np.linalg.LinAlgError(
            f"A = R + rho/2 sum a a^H is not positive definite (lambda_min={lam[0]:.3e}); "
            "use R > 0, more target angles, or diagonal loading"
        )
    nt, nph = len(p.targets), len(p.interference)
    if warm is not None:
        if warm.w.shape != (p.size,) or warm.z_th.shape != (nt,) or warm.z_ph.shape != (nph,):
            raise ValueError("warm-start state does not match the problem dimensions")
        s = warm.copy()
        if rho != warm.rho:
            # scaled duals lambda / rho are what carry over between penalties
            f = rho / warm.rho
            s.lam_th, s.eta_th, s.lam_ph, s.eta_ph = (s.lam_th * f, s.eta_th * f, s.lam_ph * f, s.eta_ph * f)
        s.rho, s.u, s.lam, s.iteration = rho, u, lam, 0
        s.primal = s.dual = np.inf
        return s
    zc = lambda n: np.zeros(n, complex)  # noqa: E731
    zr = lambda n: np.zeros(n)  # noqa: E731
    return AdmmState(
        w=zc(p.size), y=0.0, t=0.0,
        y_th=zr(nt), z_th=zc(nt), y_ph=zr(nph), z_ph=zc(nph),
        lam_th=zc(nt), eta_th=zr(nt), lam_ph=zc(nph), eta_ph=zr(nph),
        rho=rho, u=u, lam=lam,
    )


def iterate(p: PicmvProblem, s: AdmmState, fixed_t: float | None = None) -> AdmmState:
    """One ADMM sweep, in place.  ``fixed_t`` freezes the t-block (ICMV mode,
    with every gamma_k taken as 1)."""
    rho, delta = s.rho, p.delta
    at, ap = p.targets.steering, p.interference.steering
    inter = p.interference
    prev = (s.y_th.copy(), s.z_th.copy(), s.y_ph.copy(), s.z_ph.copy())

    # (w, y) block
    b = at @ np.conj(s.lam_th - rho * s.z_th)
    beta = float(np.sum(s.eta_th - rho * s.y_th))
    if len(inter):
        b = b + ap @ np.conj(s.lam_ph - rho * s.z_ph)
        beta += float(np.sum(s.eta_ph - rho * s.y_ph))
    alpha = 0.5 * rho * (len(p.targets) + len(inter))
    s.w, s.y = solve_wy(s.u, s.lam, b, alpha, beta)
    wc = s.w.conj()

    # target block
    inner_th = wc @ at
    s.y_th, s.z_th = update_theta(inner_th, s.lam_th, s.eta_th, s.y, rho, delta, p.targets.c)

    # interference block: t by breakpoint sorting, then per-angle prox
    if len(inter):
        inner_ph = wc @ ap
        b_ph = -s.lam_ph - rho * inner_ph
        beta_ph = -s.eta_ph - rho * s.y
        if fixed_t is None:
            gam = inter.gamma_per_angle()
            table = build_breakpoints(b_ph, beta_ph, rho, delta, inter.c, gam)
            s.t = solve_t(table, p.mu)
        else:
            gam = 1.0
            s.t = fixed_t
        s.y_ph, s.z_ph = update_phi(s.t, b_ph, beta_ph, rho, delta, inter.c, gam)

    # dual ascent
    s.lam_th = s.lam_th + rho * (inner_th - s.z_th)
    s.eta_th = s.eta_th + rho * (s.y - s.y_th)
    primal = max(np.max(np.abs(inner_th - s.z_th)), np.max(np.abs(s.y - s.y_th)))
    if len(inter):
        s.lam_ph = s.lam_ph + rho * (inner_ph - s.z_ph)
        s.eta_ph = s.eta_ph + rho * (s.y - s.y_ph)
        primal = max(primal, np.max(np.abs(inner_ph - s.z_ph)), np.max(np.abs(s.y - s.y_ph)))
    s.primal = float(primal)
    s.dual = residuals_dual(s, prev)
    s.iteration += 1
    return s


def residuals_dual(s: AdmmState, prev) -> float:
    change = 0.0
    for new, old in zip((s.y_th, s.z_th, s.y_ph, s.z_ph), prev):
        if new.size:
            change = max(change, float(np.max(np.abs(new - old))))
    return s.rho * change


def residuals(p: PicmvProblem, s: AdmmState, prev=None) -> tuple[float, float]:
    """``(primal, dual)`` residuals of ``s``.

    Primal is the largest consensus violation; dual is ``rho`` times the
    largest change of any auxiliary against ``prev`` (a tuple
    ``(y_th, z_th, y_ph, z_ph)``), or 0 when ``prev`` is omitted.
    """
    wc = s.w.conj()
    viol = [np.abs(wc @ p.targets.steering - s.z_th), np.abs(s.y - s.y_th)]
    if len(p.interference):
        viol += [np.abs(wc @ p.interference.steering - s.z_ph), np.abs(s.y - s.y_ph)]
    primal = float(max(np.max(v) for v in viol))
    dual = 0.0 if prev is None else residuals_dual(s, prev)
    return primal, dual


def _extract_eps(p: PicmvProblem, s: AdmmState, fixed_t: float | None):
    inter = p.interference
    k = inter.num_groups
    if k == 0:
        return np.zeros(0), np.zeros(0)
    if fixed_t is not None:
        upper = np.full(k, float(fixed_t))
    else:
        upper = s.t / inter.gamma
    resp = (np.abs(s.w.conj() @ inter.steering) + p.delta * s.y) / inter.c
    lower = np.full(k, -np.inf)
    np.maximum.at(lower, inter.group, resp)
    return upper, lower


def solve(
    p: PicmvProblem,
    rho: float | None = None,
    tol: float = 1e-5,
    max_iter: int = 1000,
    warm: AdmmState | None = None,
    fixed_t: float | None = None,
    keep_history: bool = False,
) -> Beamformer:
    """Run ADMM until both residuals are at most ``tol`` or ``max_iter`` sweeps.

    ``eps`` reports ``t / gamma_k`` (the upper end of the optimal bracket)
    and ``eps_lower`` the tightest per-group level implied by ``(w, y)``.
    """
    rho = default_rho(p.mu) if rho is None else rho
    s = init_state(p, rho, warm)
    hist = []
    converged = False
    for _ in range(max_iter):
        iterate(p, s, fixed_t)
        hist.append((s.primal, s.dual))
        if not (np.isfinite(s.primal) and np.isfinite(s.dual) and np.all(np.isfinite(s.w))):
            raise SolverDivergedError(f"ADMM diverged at iteration {s.iteration}", hist[-20:])
        if s.primal <= tol and s.dual <= tol:
            converged = True
            break
    eps, eps_lower = _extract_eps(p, s, fixed_t)
    suspect = False
    if not converged and len(hist) >= 200:
        pr = np.array([h[0] for h in hist])
        suspect = bool(pr[-1] > 100 * tol and pr[-100:].min() >= 0.5 * pr[-200:-100].min())
    log.debug("admm: %d iterations, primal=%.3e dual=%.3e", s.iteration, s.primal, s.dual)
    return Beamformer(
        w=s.w.copy(), eps=eps, eps_lower=eps_lower, objective=p.objective(s.w),
        iterations=s.iteration, primal_residual=s.primal, dual_residual=s.dual,
        converged=converged, t=s.t, y=s.y, history=hist if keep_history else [],
        infeasible_suspected=suspect, state=s,
    )
