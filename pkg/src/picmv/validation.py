"""Randomized equivalence suites: closed-form kernels and ADMM against the oracles.

Each suite draws its instances from a seeded generator and returns a
``SuiteResult``; ``run_all`` is what ``picmv validate`` executes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .admm import solve
from .array import ArrayGeometry, steering_matrix
from .kernels import build_breakpoints, prox_objective, prox_socp, solve_t, solve_wy, wy_kkt_residuals
from .linalg import HermitianMatrix
from .problem import (
    InterferenceConstraintSet,
    PicmvProblem,
    TargetConstraintSet,
    check_solution_feasibility,
    feasibility_bound,
    min_feasible_eps,
)


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    inconclusive: int = 0
    seconds: float = 0.0
    worst: float = 0.0
    counts: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def record(self, good: bool, info=None):
        if good:
            self.passed += 1
        else:
            self.failed += 1
            if len(self.failures) < 5:
                self.failures.append(info)

    def line(self) -> str:
        extra = f" inconclusive={self.inconclusive}" if self.inconclusive else ""
        tag = "PASS" if self.ok else "FAIL"
        return f"{tag} {self.name}: {self.passed} passed, {self.failed} failed{extra} ({self.seconds:.1f}s)"


# ---------------------------------------------------------------- generators

def random_prox(rng) -> dict:
    """One scalar prox instance; about a quarter have ``delta == 0``."""
    delta = 0.0 if rng.random() < 0.25 else float(10 ** rng.uniform(-3, 0.5))
    c = float(rng.uniform(0, 2))
    if delta > 0 and rng.random() < 0.2:
        c = -c  # negative caps occur inside ADMM when delta > 0
    if rng.random() < 0.05:
        c = 0.0
    return dict(
        a=float(10 ** rng.uniform(-1, 1)),
        b=complex(rng.normal(0, 2), rng.normal(0, 2)),
        c=c,
        d=complex(rng.normal(0, 1), rng.normal(0, 1)),
        alpha=float(10 ** rng.uniform(-1, 1)),
        beta=float(rng.normal(0, 3)),
        delta=delta,
    )


def random_wy(rng, max_m: int = 16):
    """Random PD ``A`` (as ``U, lam``) with ``(b, alpha, beta)`` steered
    toward each of the three solution regimes in turn."""
    m = int(rng.integers(1, max_m + 1))
    g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    q, _ = np.linalg.qr(g)
    lam = np.sort(10 ** rng.uniform(-2, 2, m))
    b = rng.normal(size=m) + 1j * rng.normal(size=m)
    alpha = float(10 ** rng.uniform(-1, 1))
    bn = np.linalg.norm(b)
    unc = np.linalg.norm(b / lam)
    which = rng.integers(3)
    if which == 0:
        beta = bn * rng.uniform(1.0, 3.0)
    elif which == 1:
        beta = -alpha * unc * rng.uniform(1.0, 3.0)
    else:
        beta = float(rng.uniform(-alpha * unc, bn))
    return q, lam, b, alpha, float(beta)


def random_table(rng):
    n = int(rng.integers(1, 40))
    delta = 0.0 if rng.random() < 0.3 else float(10 ** rng.uniform(-3, 0))
    rho = float(10 ** rng.uniform(-1, 2))
    b = rng.normal(0, 3, n) + 1j * rng.normal(0, 3, n)
    beta = rng.normal(0, 3, n)
    c = rng.uniform(0.05, 1.0, n)
    gamma = rng.uniform(0.1, 1.0, n)
    mu = 0.0 if rng.random() < 0.05 else float(10 ** rng.uniform(-2, 2))
    return build_breakpoints(b, beta, rho, delta, c, gamma), mu


def random_tiny_problem(rng, m_max: int = 8, max_constraints: int = 12) -> PicmvProblem:
    """ULA instance with a random PD covariance, a few target angles and
    one to three interference groups."""
    m = int(rng.integers(3, m_max + 1))
    geo = ArrayGeometry.ula(m)
    x = rng.normal(size=(3 * m, m)) + 1j * rng.normal(size=(3 * m, m))
    r = x.conj().T @ x / (3 * m) + 0.1 * np.eye(m)
    th0 = float(rng.uniform(-40, 40))
    nt = int(rng.integers(1, 4))
    th = th0 + 2.0 * (np.arange(nt) - (nt - 1) / 2)
    ct = rng.uniform(0.1, 0.6, nt)
    targets = TargetConstraintSet(steering_matrix(geo, th), ct, tuple(th))
    k = int(rng.integers(1, 4))
    budget = max_constraints - nt
    groups, names = [], []
    for _ in range(k):
        n_k = int(rng.integers(1, max(2, min(4, budget - (k - len(groups) - 1)) + 1)))
        n_k = max(1, min(n_k, budget - (k - len(groups) - 1)))
        budget -= n_k
        while True:
            ph0 = float(rng.uniform(-85, 85))
            if abs(ph0 - th0) > 20:
                break
        ph = np.clip(ph0 + 1.5 * (np.arange(n_k) - (n_k - 1) / 2), -90, 90)
        groups.append((steering_matrix(geo, ph), rng.uniform(0.1, 1.0, n_k)))
        names.extend(ph.tolist())
    gamma = rng.uniform(0.2, 1.0, k)
    inter = InterferenceConstraintSet.from_groups(groups, gamma=gamma, angles=tuple(names))
    dmax = feasibility_bound(targets)
    delta = 0.0 if rng.random() < 0.3 else float(rng.uniform(0, 0.5) * dmax)
    mu = float(10 ** rng.uniform(-1, 1))
    return PicmvProblem(HermitianMatrix(r), targets, inter, mu, delta)


# -------------------------------------------------------------------- suites

def prox_suite(n: int = 1000, seed: int = 1) -> SuiteResult:
    """Closed-form prox objective never beaten by the grid oracle."""
    res = SuiteResult("prox vs grid oracle")
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    for i in range(n):
        q = random_prox(rng)
        x, y = prox_socp(**q)
        f = prox_objective(q["a"], q["b"], q["alpha"], q["beta"], x, y)
        xg, yg, fg, h = oracle.prox_grid_oracle(**q, resolution=32, levels=6)
        viol = abs(x - q["d"]) + q["delta"] * y - q["c"]
        scale = 1.0 + abs(q["c"])
        # objective error of the best grid point is O(gradient * spacing)
        grad = 2 * q["a"] * (abs(xg) + abs(q["d"])) + abs(q["b"]) + 2 * q["alpha"] * abs(yg) + abs(q["beta"])
        slack = 1e-8 + grad * h
        good = f <= fg + slack and viol <= 1e-12 * scale
        res.worst = max(res.worst, f - fg)
        res.record(good, (i, q, f, fg, viol))
    res.seconds = time.perf_counter() - t0
    return res


def wy_suite(n: int = 1000, seed: int = 2, max_m: int = 16) -> SuiteResult:
    """KKT residuals of the (w, y) block, with regime counts."""
    res = SuiteResult("(w, y) block KKT")
    res.counts = {"zero": 0, "interior": 0, "boundary": 0}
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    for i in range(n):
        u, lam, b, alpha, beta = random_wy(rng, max_m)
        w, y, branch = solve_wy(u, lam, b, alpha, beta, return_branch=True)
        res.counts[branch] += 1
        stat, comp, prim = wy_kkt_residuals(u, lam, b, alpha, beta, w, y)
        worst = max(stat, comp, prim / max(1.0, y))
        res.worst = max(res.worst, worst)
        res.record(worst <= 1e-8, (i, branch, stat, comp, prim))
    res.seconds = time.perf_counter() - t0
    return res


def t_suite(n: int = 1000, seed: int = 3) -> SuiteResult:
    """Sorted breakpoint sweep against the t grid oracle, plus the
    optimality condition and continuity of every piece."""
    res = SuiteResult("t block vs grid oracle")
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    for i in range(n):
        table, mu = random_table(rng)
        t = solve_t(table, mu)
        tg = oracle.t_grid_oracle(table, mu)
        # with mu == 0 the minimizers form a ray; compare objective values there
        if mu == 0:
            vals = oracle.t_objective(table, mu, np.array([t, tg]))
            agree = vals[0] <= vals[1] + 1e-9 * max(1.0, abs(vals[1]))
        else:
            agree = abs(t - tg) <= 1e-6
        g = table.slope(t) + mu
        scale = max(1.0, mu, float(np.sum(np.abs(table.b2))))
        if np.isfinite(table.lower) and t <= table.lower:
            opt = g >= -1e-9 * scale  # clipped at t = 0
        else:
            opt = abs(g) <= 1e-9 * scale
        cont = 0.0
        for tb in (table.t1, table.t2):
            left = table.a1 * tb**2 + table.b1 * tb if tb is table.t1 else table.a2 * tb**2 + table.b2 * tb + table.c2
            right = table.a2 * tb**2 + table.b2 * tb + table.c2 if tb is table.t1 else table.c3
            if tb is table.t1 and np.isfinite(table.lower):
                continue
            cont = max(cont, float(np.max(np.abs(left - right) / np.maximum(1.0, np.abs(right)))))
        good = agree and opt and cont <= 1e-9
        res.worst = max(res.worst, abs(t - tg))
        res.record(good, (i, mu, t, tg, g, cont))
    res.seconds = time.perf_counter() - t0
    return res


def admm_suite(n: int = 50, seed: int = 4, rtol: float = 1e-3, feas_tol: float = 1e-4,
               oracle_steps: int = 20000) -> SuiteResult:
    """Tiny full problems: ADMM objective within ``rtol`` of the oracle."""
    res = SuiteResult("tiny ADMM vs reference solver")
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    for i in range(n):
        p = random_tiny_problem(rng)
        bf = solve(p, rho=max(1.0, p.mu), tol=1e-8, max_iter=20000)
        ref = oracle.reference_solve(p, steps=oracle_steps, seed=i)
        if not ref.found:
            res.inconclusive += 1
            continue
        # score ADMM at its tightest eps; violations of the target set count
        eps = min_feasible_eps(p, bf.w)
        feas = check_solution_feasibility(p, bf.w, eps, tol=feas_tol)
        gap = oracle.compare(ref, p.objective(bf.w, eps))
        res.worst = max(res.worst, abs(gap))
        res.record(abs(gap) <= rtol and feas.feasible, (i, gap, feas.max_violation, bf.converged))
    res.seconds = time.perf_counter() - t0
    return res


def run_all(fast: bool = False) -> list[SuiteResult]:
    scale = 0.2 if fast else 1.0
    return [
        prox_suite(int(1000 * scale)),
        wy_suite(int(1000 * scale)),
        t_suite(int(1000 * scale)),
        admm_suite(max(5, int(20 * scale))),
    ]
