"""Reference beamformers: MVDR, diagonal loading, LCMV and ICMV."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admm import Beamformer, default_rho, solve
from .linalg import HermitianMatrix
from .problem import PicmvProblem


def _herm(r) -> HermitianMatrix:
    return r if isinstance(r, HermitianMatrix) else HermitianMatrix(r)


def mvdr(r, a: np.ndarray) -> np.ndarray:
    """``R^{-1} a / (a^H R^{-1} a)``."""
    r = _herm(r)
    ria = r.solve(a)
    return ria / np.vdot(a, ria)


def lsmi(r, a: np.ndarray, load_factor: float) -> np.ndarray:
    """MVDR on the diagonally loaded covariance ``R + load_factor I``."""
    if load_factor < 0:
        raise ValueError("load_factor must be >= 0")
    r = _herm(r)
    return mvdr(r.loaded(load_factor) if load_factor else r, a)


def default_load(r) -> float:
    """Ten times the smallest eigenvalue of ``r``."""
    return 10.0 * float(_herm(r).eigenvalues[0])


@dataclass(frozen=True)
class LinearConstraints:
    C: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.C, dtype=complex))
        f = np.atleast_1d(np.asarray(self.f, dtype=complex))
        if f.shape != (c.shape[1],):
            raise ValueError("one response value per constraint column")
        if c.shape[1] > c.shape[0]:
            raise ValueError(
                f"{c.shape[1]} linear constraints exceed the {c.shape[0]} array degrees of freedom"
            )
        if np.linalg.matrix_rank(c) < c.shape[1]:
            raise ValueError("constraint matrix is rank deficient")
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "f", f)


def lcmv(r, constraints: LinearConstraints) -> np.ndarray:
    """Minimize ``w^H R w`` subject to ``C^H w = f``."""
    r = _herm(r)
    c, f = constraints.C, constraints.f
    ric = r.solve(c)
    return ric @ np.linalg.solve(c.conj().T @ ric, f)


def icmv(p: PicmvProblem, rho: float | None = None, tol: float = 1e-5, max_iter: int = 1000) -> Beamformer:
    """Fixed-bound variant: every interference bound is its own ``c_phi``.

    Runs the P-ICMV ADMM with the t-block frozen at 1 and unit group
    weights, so the penalty term plays no role.  ``infeasible_suspected`` on
    the result flags stalled primal residuals.
    """
    if rho is None:
        rho = default_rho(float(p.R.eigenvalues[-1]))
    return solve(p, rho=rho, tol=tol, max_iter=max_iter, fixed_t=1.0)
