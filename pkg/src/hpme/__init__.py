"""Porous medium equation with growing data on rotationally symmetric manifolds."""

__version__ = "0.1.0"

from .errors import (ConstraintError, ConstructionError, DomainError, HPMEError, SolverError,
                     VerificationError)
from .geometry import (GeometryProfile, ModelFunction, RadialGrid, compute_H, curvature_profile,
                       eval_model, euclidean, hyperbolic, make_grid, model_from_name,
                       splice_power_psi, splice_quadratic_psi, splice_superquadratic_psi,
                       stochastic_completeness)

__all__ = [
    "ConstraintError", "ConstructionError", "DomainError", "HPMEError", "SolverError",
    "VerificationError", "GeometryProfile", "ModelFunction", "RadialGrid", "compute_H",
    "curvature_profile", "eval_model", "euclidean", "hyperbolic", "make_grid",
    "model_from_name", "splice_power_psi", "splice_quadratic_psi", "splice_superquadratic_psi",
    "stochastic_completeness",
]
