"""Array geometries, steering vectors, calibration errors and snapshots.

Linear arrays take a single angle in degrees in [-90, 90], measured from
broadside.  Planar arrays take ``(azimuth, elevation)`` in degrees with
azimuth in [0, 180] and elevation in [-90, 90].  Element ``(m, n)`` of an
``M1 x M2`` planar grid (row ``m`` along x, column ``n`` along y) has phase
``2 pi d (m cos(el) cos(az) + n cos(el) sin(az))``; elements are flattened
row-major.  That array lies in the horizontal x-y plane and cannot tell
``el`` from ``-el``.  ``plane="xz"`` stands the array up instead (column
``n`` along z, phase ``2 pi d (m cos(el) cos(az) + n sin(el))``), which maps
every (azimuth, elevation) pair to a distinct steering vector.

All random draws use ``numpy.random.Generator`` (PCG64), so a fixed seed
reproduces results exactly on the same build.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LINEAR = "linear"
PLANAR = "planar"


@dataclass(frozen=True)
class ArrayGeometry:
    kind: str = LINEAR
    shape: tuple = (20,)
    spacing: float = 0.5
    plane: str = "xy"

    def __post_init__(self):
        shape = tuple(int(s) for s in np.atleast_1d(self.shape))
        object.__setattr__(self, "shape", shape)
        if self.kind == LINEAR and len(shape) != 1:
            raise ValueError("linear array needs one element count")
        if self.kind == PLANAR and len(shape) != 2:
            raise ValueError("planar array needs two element counts")
        if self.kind not in (LINEAR, PLANAR):
            raise ValueError(f"unknown array kind {self.kind!r}")
        if min(shape) < 1:
            raise ValueError("element counts must be >= 1")
        if not self.spacing > 0:
            raise ValueError("element spacing must be positive")
        if self.plane not in ("xy", "xz"):
            raise ValueError(f"planar array plane must be 'xy' or 'xz', got {self.plane!r}")

    @classmethod
    def ula(cls, m: int, spacing: float = 0.5) -> ArrayGeometry:
        return cls(LINEAR, (m,), spacing)

    @classmethod
    def upa(cls, m1: int, m2: int, spacing: float = 0.5, plane: str = "xy") -> ArrayGeometry:
        return cls(PLANAR, (m1, m2), spacing, plane)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def _check_directions(geometry: ArrayGeometry, d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if geometry.kind == LINEAR:
        d = np.atleast_1d(d)
        if d.ndim != 1:
            raise ValueError("linear array directions must be scalar angles")
        if np.any(np.abs(d) > 90.0 + 1e-9):
            raise ValueError("linear-array angle outside [-90, 90] degrees")
    else:
        d = np.atleast_2d(d)
        if d.shape[-1] != 2:
            raise ValueError("planar directions are (azimuth, elevation) pairs")
        az, el = d[:, 0], d[:, 1]
        if np.any((az < -1e-9) | (az > 180.0 + 1e-9)):
            raise ValueError("azimuth outside [0, 180] degrees")
        if np.any(np.abs(el) > 90.0 + 1e-9):
            raise ValueError("elevation outside [-90, 90] degrees")
    return d


def steering_matrix(geometry: ArrayGeometry, directions) -> np.ndarray:
    """Stack steering vectors as the columns of an ``(M, n_dirs)`` matrix."""
    d = _check_directions(geometry, directions)
    k = 2.0 * np.pi * geometry.spacing
    if geometry.kind == LINEAR:
        m = np.arange(geometry.size)[:, None]
        phase = k * m * np.sin(np.deg2rad(d))[None, :]
    else:
        m1, m2 = geometry.shape
        rows, cols = np.meshgrid(np.arange(m1), np.arange(m2), indexing="ij")
        rows, cols = rows.ravel()[:, None], cols.ravel()[:, None]
        az, el = np.deg2rad(d[:, 0]), np.deg2rad(d[:, 1])
        ux = (np.cos(el) * np.cos(az))[None, :]
        if geometry.plane == "xy":
            u2 = (np.cos(el) * np.sin(az))[None, :]
        else:
            u2 = np.sin(el)[None, :]
        phase = k * (rows * ux + cols * u2)
    return np.exp(1j * phase)


def steering_vector(geometry: ArrayGeometry, direction) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    if (geometry.kind == LINEAR and d.ndim != 0) or (geometry.kind == PLANAR and d.shape != (2,)):
        raise ValueError(f"expected a single direction, got {direction!r}")
    return steering_matrix(geometry, direction)[:, 0]


def perturb_gain_phase(a: np.ndarray, gain_std: float, phase_std: float, rng) -> np.ndarray:
    """Apply per-element gain ~ N(1, gain_std^2) and phase ~ N(0, phase_std^2).

    ``a`` may be a vector or an ``(M, n)`` matrix; one gain/phase draw per
    element is shared by every column, as a calibration error would be.
    """
    if gain_std < 0 or phase_std < 0:
        raise ValueError("perturbation standard deviations must be >= 0")
    a = np.asarray(a, dtype=complex)
    m = a.shape[0]
    g = rng.normal(1.0, gain_std, m) if gain_std > 0 else np.ones(m)
    p = rng.normal(0.0, phase_std, m) if phase_std > 0 else np.zeros(m)
    factor = g * np.exp(1j * p)
    return a * (factor if a.ndim == 1 else factor[:, None])


def kappa_stds(kappa: float) -> tuple[float, float]:
    """Gain and phase standard deviations for a kappa-level perturbation."""
    return kappa, kappa * np.pi / 2.0


def draw_doa_estimate(theta_true: float, half_width: float, rng, lo: float = -90.0, hi: float = 90.0) -> float:
    if half_width < 0:
        raise ValueError("half_width must be >= 0")
    if half_width == 0:
        return float(theta_true)
    est = rng.uniform(theta_true - half_width, theta_true + half_width)
    return float(np.clip(est, lo, hi))


def db_to_power(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class Scenario:
    """Narrowband scene: one target, K interferers and white noise.

    Powers are linear.  ``doa_half_width`` drives the presumed directions
    handed to beamformers; sources always sit at their true directions.
    """

    geometry: ArrayGeometry
    target_angle: float
    target_power: float
    interferer_angles: tuple = ()
    interferer_powers: tuple = ()
    noise_power: float = 1.0
    doa_half_width: float = 0.0
    gain_std: float = 0.0
    phase_std: float = 0.0
    seed: int | None = None
    true_steering: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "interferer_angles", tuple(float(x) for x in self.interferer_angles))
        object.__setattr__(self, "interferer_powers", tuple(float(x) for x in self.interferer_powers))
        if len(self.interferer_angles) != len(self.interferer_powers):
            raise ValueError("one power per interferer required")
        if self.target_power < 0 or self.noise_power < 0 or any(p < 0 for p in self.interferer_powers):
            raise ValueError("powers must be >= 0")
        angles = [self.target_angle, *self.interferer_angles]
        if len(set(angles)) != len(angles):
            raise ValueError("source directions must be distinct")
        if self.true_steering is None:
            object.__setattr__(self, "true_steering", steering_matrix(self.geometry, angles))

    @property
    def num_interferers(self) -> int:
        return len(self.interferer_angles)

    @property
    def source_angles(self) -> list:
        return [self.target_angle, *self.interferer_angles]

    def with_calibration_error(self, rng) -> Scenario:
        """Copy whose true steering vectors carry a fresh gain/phase error."""
        nominal = steering_matrix(self.geometry, self.source_angles)
        pert = perturb_gain_phase(nominal, self.gain_std, self.phase_std, rng)
        return _replace_steering(self, pert)

    def interference_noise_covariance(self) -> np.ndarray:
        """Analytic ``sum_k s_k a_k a_k^H + s_v I`` from the true steering vectors."""
        a = self.true_steering[:, 1:]
        p = np.asarray(self.interferer_powers)
        r = (a * p[None, :]) @ a.conj().T
        return r + self.noise_power * np.eye(self.geometry.size)

    def optimal_sinr(self) -> float:
        """Linear SINR of ``R^{-1} a0`` against the true covariance."""
        from .linalg import HermitianMatrix

        a0 = self.true_steering[:, 0]
        r = HermitianMatrix(self.interference_noise_covariance())
        return float(self.target_power * r.quad_inv(a0))


def _replace_steering(s: Scenario, steering: np.ndarray) -> Scenario:
    return Scenario(
        s.geometry, s.target_angle, s.target_power, s.interferer_angles,
        s.interferer_powers, s.noise_power, s.doa_half_width, s.gain_std,
        s.phase_std, s.seed, steering,
    )


def _cgauss(rng, power: float, shape) -> np.ndarray:
    scale = np.sqrt(power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_snapshots(s: Scenario, n: int, include_target: bool, rng) -> np.ndarray:
    """Draw ``n`` snapshots as the rows of an ``(n, M)`` array."""
    if n < 1:
        raise ValueError("need at least one snapshot")
    m = s.geometry.size
    powers = np.array([s.target_power if include_target else 0.0, *s.interferer_powers])
    sig = _cgauss(rng, 1.0, (n, len(powers))) * np.sqrt(powers)[None, :]
    x = sig @ s.true_steering.T
    if s.noise_power > 0:
        x = x + _cgauss(rng, s.noise_power, (n, m))
    return x


def output_sinr(w: np.ndarray, s: Scenario) -> float:
    """Output SINR in dB of weights ``w`` against the scenario's true model."""
    w = np.asarray(w, dtype=complex)
    if not np.any(w):
        raise ValueError("beamformer weights are all zero")
    a0 = s.true_steering[:, 0]
    sig = s.target_power * abs(np.vdot(w, a0)) ** 2
    noise = float(np.real(np.vdot(w, s.interference_noise_covariance() @ w)))
    return 10.0 * np.log10(sig / noise)
