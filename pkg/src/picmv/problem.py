"""P-ICMV problem instances, feasibility certificates and weight tuning.

The design problem is

    min_{w, eps}  w^H R w + mu * max_k gamma_k eps_k
    s.t.  |w^H a_th - 1| + delta ||w|| <= c_th          for every target angle
          |w^H a_ph| + delta ||w|| <= eps_k c_ph        for every angle of group k
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .array import ArrayGeometry, steering_matrix
from .linalg import HermitianMatrix, capon_spectrum

COND_LIMIT = 1e12

DEFAULT_TARGET_OFFSETS = (-2.0, -1.0, 0.0, 1.0, 2.0)
DEFAULT_TARGET_C = (0.6, 0.4, 0.2, 0.4, 0.6)
DEFAULT_INTERFERENCE_OFFSETS = tuple(float(k) for k in range(-4, 5))


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True)
class TargetConstraintSet:
    steering: np.ndarray  # (M, n_theta), one column per angle
    c: np.ndarray
    angles: tuple | None = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.steering, dtype=complex))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if a.shape[1] < 1:
            raise ValueError("target set needs at least one angle")
        if c.shape != (a.shape[1],):
            raise ValueError("one threshold c_theta per target steering vector")
        if np.any(c < 0):
            raise ValueError("target thresholds must be >= 0")
        object.__setattr__(self, "steering", a)
        object.__setattr__(self, "c", c)

    def __len__(self) -> int:
        return self.steering.shape[1]


@dataclass(frozen=True)
class InterferenceConstraintSet:
    """Interference constraints flattened across groups.

    ``group[i]`` is the group index of column ``i`` of ``steering``;
    ``gamma[k]`` is the min-max weight of group ``k``.
    """

    steering: np.ndarray  # (M, n_phi)
    c: np.ndarray
    group: np.ndarray
    gamma: np.ndarray
    angles: tuple | None = None

    def __post_init__(self):
        a = np.asarray(self.steering, dtype=complex)
        if a.ndim != 2:
            raise ValueError("interference steering must be an (M, n) matrix")
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        g = np.atleast_1d(np.asarray(self.group, dtype=int))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        n = a.shape[1]
        if c.shape != (n,) or g.shape != (n,):
            raise ValueError("c and group need one entry per interference angle")
        if n and (g.min() < 0 or g.max() >= gamma.size):
            raise ValueError("group index out of range")
        if n and np.any(np.bincount(g, minlength=gamma.size) == 0):
            raise ValueError("every interference group needs at least one angle")
        if np.any(c <= 0):
            raise ValueError("interference thresholds c_phi must be > 0")
        if np.any(gamma <= 0):
            raise ValueError("group weights gamma_k must be > 0")
        for name, val in (("steering", a), ("c", c), ("group", g), ("gamma", gamma)):
            object.__setattr__(self, name, val)

    @classmethod
    def from_groups(cls, groups, gamma=None, angles=None) -> InterferenceConstraintSet:
        """Build from a list of ``(steering (M, n_k), c (n_k,))`` pairs."""
        groups = list(groups)
        if not groups:
            raise ValueError("use InterferenceConstraintSet.empty(M) for no groups")
        mats = [np.atleast_2d(np.asarray(a, dtype=complex)) for a, _ in groups]
        cs = [np.atleast_1d(np.asarray(c, dtype=float)) for _, c in groups]
        gid = np.concatenate([np.full(m.shape[1], k) for k, m in enumerate(mats)])
        gamma = np.ones(len(groups)) if gamma is None else gamma
        return cls(np.hstack(mats), np.concatenate(cs), gid, gamma, angles)

    @classmethod
    def empty(cls, m: int) -> InterferenceConstraintSet:
        return cls(np.zeros((m, 0), complex), np.zeros(0), np.zeros(0, int), np.zeros(0))

    @property
    def num_groups(self) -> int:
        return self.gamma.size

    def __len__(self) -> int:
        return self.steering.shape[1]

    def gamma_per_angle(self) -> np.ndarray:
        return self.gamma[self.group]


@dataclass(frozen=True)
class PicmvProblem:
    R: HermitianMatrix
    targets: TargetConstraintSet
    interference: InterferenceConstraintSet
    mu: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        r = self.R if isinstance(self.R, HermitianMatrix) else HermitianMatrix(self.R)
        object.__setattr__(self, "R", r)
        m = r.size
        if self.targets.steering.shape[0] != m or self.interference.steering.shape[0] != m:
            raise ValueError("steering vectors must have the covariance dimension")
        if self.mu < 0 or self.delta < 0:
            raise ValueError("mu and delta must be >= 0")
        lam = r.eigenvalues
        if lam[0] < -1e-10 * max(abs(lam[-1]), 1.0):
            raise ValueError("R must be positive semidefinite")

    @property
    def size(self) -> int:
        return self.R.size

    @property
    def num_constraints(self) -> int:
        return len(self.targets) + len(self.interference)

    def objective(self, w: np.ndarray, eps: np.ndarray | None = None) -> float:
        """Objective at ``(w, eps)``; the tightest feasible eps when omitted."""
        w = np.asarray(w, dtype=complex)
        quad = float(np.real(np.vdot(w, self.R.entries @ w)))
        if self.interference.num_groups == 0:
            return quad
        if eps is None:
            eps = min_feasible_eps(self, w)
        return quad + self.mu * float(np.max(self.interference.gamma * eps))


def min_feasible_eps(p: PicmvProblem, w: np.ndarray) -> np.ndarray:
    """Smallest eps_k making the interference constraints hold for ``w``."""
    inter = p.interference
    w = np.asarray(w, dtype=complex)
    resp = np.abs(inter.steering.conj().T @ w) + p.delta * np.linalg.norm(w)
    eps = np.zeros(inter.num_groups)
    np.maximum.at(eps, inter.group, resp / inter.c)
    return eps


def feasibility_bound(targets: TargetConstraintSet) -> float:
    """Largest delta for which feasibility is certified by ``A (A^H A)^{-1} 1``."""
    a = targets.steering
    gram = a.conj().T @ a
    lam = np.linalg.eigvalsh(gram)
    if lam[0] <= 0 or lam[-1] / lam[0] > COND_LIMIT:
        i, j = _most_collinear_pair(a)
        names = targets.angles if targets.angles is not None else range(a.shape[1])
        names = list(names)
        raise RankDeficientError(
            f"target steering matrix is rank deficient; angles {names[i]} and "
            f"{names[j]} are nearly collinear"
        )
    ones = np.ones(a.shape[1])
    q = float(np.real(ones @ np.linalg.solve(gram, ones)))
    return float(np.min(targets.c) / np.sqrt(q))


def feasibility_witness(targets: TargetConstraintSet) -> np.ndarray:
    """Minimum-norm ``w`` with ``A^H w = 1``."""
    a = targets.steering
    return a @ np.linalg.solve(a.conj().T @ a, np.ones(a.shape[1]))


def _most_collinear_pair(a: np.ndarray) -> tuple[int, int]:
    if a.shape[1] < 2:
        return 0, 0
    an = a / np.linalg.norm(a, axis=0, keepdims=True)
    coh = np.abs(an.conj().T @ an)
    np.fill_diagonal(coh, -1.0)
    i, j = np.unravel_index(np.argmax(coh), coh.shape)
    return int(min(i, j)), int(max(i, j))


def auto_tune_weights(r: HermitianMatrix, inter: InterferenceConstraintSet) -> InterferenceConstraintSet:
    """Set c_phi and gamma_k from the Capon spectrum of ``r``.

    Within each group, c_phi is the inverse Capon amplitude normalized by its
    group maximum; gamma_k is the group's summed Capon power normalized by
    the largest group sum.
    """
    r.check_invertible()
    power = np.array([capon_spectrum(r, inter.steering[:, i]) for i in range(len(inter))])
    inv_amp = 1.0 / np.sqrt(power)
    grp_max = np.zeros(inter.num_groups)
    np.maximum.at(grp_max, inter.group, inv_amp)
    c = inv_amp / grp_max[inter.group]
    beta = np.bincount(inter.group, weights=power, minlength=inter.num_groups)
    gamma = beta / beta.max()
    return InterferenceConstraintSet(inter.steering, c, inter.group, gamma, inter.angles)


@dataclass(frozen=True)
class FeasibilityReport:
    target_violation: float
    interference_violation: float
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.target_violation, self.interference_violation)

    @property
    def feasible(self) -> bool:
        return self.max_violation <= self.tol


def check_solution_feasibility(p: PicmvProblem, w, eps, tol: float = 1e-5) -> FeasibilityReport:
    w = np.asarray(w, dtype=complex)
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if w.shape != (p.size,):
        raise ValueError(f"w has shape {w.shape}, expected ({p.size},)")
    if eps.shape != (p.interference.num_groups,):
        raise ValueError("eps needs one entry per interference group")
    dn = p.delta * np.linalg.norm(w)
    t = p.targets
    tv = np.abs(t.steering.conj().T @ w - 1.0) + dn - t.c
    target_v = float(np.max(tv))
    inter = p.interference
    if len(inter):
        iv = np.abs(inter.steering.conj().T @ w) + dn - eps[inter.group] * inter.c
        inter_v = float(np.max(iv))
    else:
        inter_v = -np.inf
    return FeasibilityReport(target_v, inter_v, tol)


def robust_bound_check(w, a_true, a_presumed, delta: float, bound: float, kind: str = "target", tol: float = 1e-9):
    """Check the true response bound implied by a satisfied presumed constraint.

    ``bound`` is c_theta for a target angle or eps_k * c_phi for an
    interference angle.  Returns ``True``/``False`` for the bound on the
    true response, or ``None`` (with a warning) when the presumed
    constraint does not hold or ``||a_true - a_presumed|| > delta``.
    """
    w = np.asarray(w, dtype=complex)
    a_true = np.asarray(a_true, dtype=complex)
    a_presumed = np.asarray(a_presumed, dtype=complex)
    if np.linalg.norm(a_true - a_presumed) > delta * (1 + 1e-12) + 1e-15:
        warnings.warn("perturbation norm exceeds delta; bound check skipped", stacklevel=2)
        return None
    if kind == "target":
        presumed = abs(np.vdot(w, a_presumed) - 1.0)
        true = abs(np.vdot(w, a_true) - 1.0)
    elif kind == "interference":
        presumed = abs(np.vdot(w, a_presumed))
        true = abs(np.vdot(w, a_true))
    else:
        raise ValueError(f"unknown constraint kind {kind!r}")
    if presumed + delta * np.linalg.norm(w) > bound + tol:
        warnings.warn("presumed constraint not satisfied; bound check skipped", stacklevel=2)
        return None
    return bool(true <= bound + tol)


def adaptive_problem(
    R: HermitianMatrix,
    geometry: ArrayGeometry,
    target_angle: float,
    interferer_angles,
    mu: float,
    delta: float,
    target_offsets=DEFAULT_TARGET_OFFSETS,
    target_c=DEFAULT_TARGET_C,
    interference_offsets=DEFAULT_INTERFERENCE_OFFSETS,
    auto_tune: bool = True,
) -> PicmvProblem:
    """Antenna-array problem: target set around ``target_angle``, one group
    of angles around each presumed interferer direction."""
    th = [float(np.clip(target_angle + o, -90, 90)) for o in target_offsets]
    targets = TargetConstraintSet(steering_matrix(geometry, th), target_c, tuple(th))
    if len(interferer_angles):
        groups, names = [], []
        for ang in interferer_angles:
            ph = [float(np.clip(ang + o, -90, 90)) for o in interference_offsets]
            groups.append((steering_matrix(geometry, ph), np.ones(len(ph))))
            names.extend(ph)
        inter = InterferenceConstraintSet.from_groups(groups, angles=tuple(names))
        if auto_tune:
            inter = auto_tune_weights(R, inter)
    else:
        inter = InterferenceConstraintSet.empty(geometry.size)
    return PicmvProblem(R, targets, inter, mu, delta)
