"""Penalized inequality-constrained minimum-variance (P-ICMV) beamforming.

Closed-form ADMM kernels, the ADMM solver, classical baselines, slow
reference oracles and the experiment harness.
"""

from .admm import Beamformer, SolverDivergedError, solve
from .array import ArrayGeometry, Scenario, steering_matrix, steering_vector
from .baselines import icmv, lcmv, lsmi, mvdr
from .linalg import HermitianMatrix, SingularCovarianceError, sample_covariance
from .problem import (
    InterferenceConstraintSet,
    PicmvProblem,
    TargetConstraintSet,
    adaptive_problem,
    feasibility_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "Beamformer", "HermitianMatrix", "InterferenceConstraintSet",
    "PicmvProblem", "Scenario", "SingularCovarianceError", "SolverDivergedError",
    "TargetConstraintSet", "adaptive_problem", "feasibility_bound", "icmv", "lcmv",
    "lsmi", "mvdr", "sample_covariance", "solve", "steering_matrix", "steering_vector",
]
