"""Hermitian matrices, sample covariance and the Capon spectrum."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-8
SINGULAR_RTOL = 1e-12


class SingularCovarianceError(ValueError):
    """Raised when a covariance is too ill-conditioned to invert."""


@dataclass(frozen=True)
class HermitianMatrix:
    """Immutable Hermitian matrix with a lazily cached eigendecomposition.

    Eigenvalues are stored ascending. Inverses and solves go through the
    factorization rather than a general-purpose inverse.
    """

    entries: np.ndarray
    _eig: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        h = np.array(self.entries, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 1:
            raise ValueError(f"expected a square matrix, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("matrix has non-finite entries")
        scale = max(np.max(np.abs(h)), 1.0)
        asym = np.max(np.abs(h - h.conj().T))
        if asym > HERMITIAN_TOL * scale:
            raise ValueError(f"matrix is not Hermitian (max asymmetry {asym:.3e})")
        h = 0.5 * (h + h.conj().T)
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """``(U, lam)`` with ``H = U diag(lam) U^H`` and ``lam`` ascending."""
        if self._eig is None:
            lam, u = np.linalg.eigh(self.entries)
            lam.setflags(write=False)
            u.setflags(write=False)
            object.__setattr__(self, "_eig", (u, lam))
        return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig[1]

    def check_invertible(self, what: str = "covariance") -> None:
        lam = self.eigenvalues
        lam_max = max(abs(lam[-1]), abs(lam[0]))
        if lam_max == 0.0 or lam[0] < SINGULAR_RTOL * lam_max:
            raise SingularCovarianceError(
                f"{what} is singular or indefinite (lambda_min={lam[0]:.3e}, "
                f"lambda_max={lam_max:.3e}); apply diagonal loading R + gI"
            )

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Return ``H^{-1} b`` via the eigendecomposition."""
        self.check_invertible()
        u, lam = self.eig
        b = np.asarray(b, dtype=complex)
        uhb = u.conj().T @ b
        if uhb.ndim == 1:
            return u @ (uhb / lam)
        return u @ (uhb / lam[:, None])

    def quad_inv(self, a: np.ndarray) -> float:
        """``a^H H^{-1} a`` for one vector."""
        self.check_invertible()
        u, lam = self.eig
        uha = u.conj().T @ np.asarray(a, dtype=complex)
        return float(np.sum(np.abs(uha) ** 2 / lam))

    def scaled(self, c: float) -> HermitianMatrix:
        return HermitianMatrix(c * self.entries)

    def loaded(self, load: float) -> HermitianMatrix:
        return HermitianMatrix(self.entries + load * np.eye(self.size))


def herm_eig(h: HermitianMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition ``(U, lam)`` of a Hermitian matrix, ``lam`` ascending.

    Plain arrays are validated for Hermitian symmetry first; a violation
    beyond 1e-8 (relative to the largest entry) raises ``ValueError``.
    """
    if not isinstance(h, HermitianMatrix):
        h = HermitianMatrix(h)
    return h.eig


def sample_covariance(snapshots) -> HermitianMatrix:
    """Average of ``x x^H`` over the snapshots.

    ``snapshots`` is either a sequence of length-M vectors or an (N, M)
    array with one snapshot per row.
    """
    if len(snapshots) == 0:
        raise ValueError("need at least one snapshot")
    try:
        x = np.array(snapshots, dtype=complex)
    except ValueError as exc:
        raise ValueError("snapshots have inconsistent lengths") from exc
    if x.ndim != 2:
        raise ValueError("snapshots have inconsistent lengths")
    n = x.shape[0]
    return HermitianMatrix(x.T @ x.conj() / n)


def capon_spectrum(r: HermitianMatrix, a: np.ndarray) -> float:
    """Capon power estimate ``1 / (a^H R^{-1} a)``."""
    return 1.0 / r.quad_inv(a)
