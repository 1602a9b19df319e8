"""Incident sound field estimation with scattering-field separation.

Estimates the incident pressure field inside a spherical region that
contains an unknown rigid scatterer, from microphone measurements on
surrounding shells. The incident field is modeled by kernel ridge
regression in a Helmholtz-constrained reproducing kernel space; the field
radiated by the scatterer is modeled by a truncated exterior spherical-wave
expansion, and both coefficient sets are fitted jointly in closed form.
"""

from .estimators import (
    KernelRidgeFieldEstimator,
    ScatterSeparatedFieldEstimator,
    SingularSystemError,
    solve_joint_separation,
    solve_kernel_ridge,
    weighting_matrix,
)
from .kernels import KernelSpec, gram_matrix, kernel_eval, kernel_matrix
from .scenario import (
    EvaluationGrid,
    MethodSpec,
    MicrophoneLayout,
    Scenario,
    default_methods,
    evaluation_grid,
    frequency_sweep,
    grid_search,
    nmse_db,
)

__version__ = "0.1.0"

__all__ = [
    "KernelRidgeFieldEstimator",
    "ScatterSeparatedFieldEstimator",
    "SingularSystemError",
    "solve_joint_separation",
    "solve_kernel_ridge",
    "weighting_matrix",
    "KernelSpec",
    "gram_matrix",
    "kernel_eval",
    "kernel_matrix",
    "EvaluationGrid",
    "MethodSpec",
    "MicrophoneLayout",
    "Scenario",
    "default_methods",
    "evaluation_grid",
    "frequency_sweep",
    "grid_search",
    "nmse_db",
    "__version__",
]
