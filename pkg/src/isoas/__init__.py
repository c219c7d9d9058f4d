"""Invariant set computation for linear systems with saturating inputs."""

from .config import load_problem
from .errors import (CapExceededError, IsoasError, LPSolverError, ModelError,
                     SchemaError)
from .geometry import (ConstraintBundle, LPResult, Polyhedron, cross_section,
                       intersect, is_empty, lp_solve, remove_redundant_rows,
                       tighten, vertices_2d)
from .model import (OutputConstraints, Plant, RegionTriple, SaturatedLoop,
                    build_regions, equilibrium_basis, validate)
from .oracle import (lqr_gain, omega_membership, saturate, simulate,
                     verify_set)
from .propagation import (Caps, ControlAuthority, Options, PropagationResult,
                          control_authority, propagate_lower, propagate_nonsat,
                          propagate_upper)
from .sets import (IsoasResult, MoasResult, compute_isoas, compute_moas,
                   erosion_filter, membership)

__version__ = "0.1.0"

__all__ = [
    "load_problem",
    "CapExceededError", "IsoasError", "LPSolverError", "ModelError",
    "SchemaError", "ConstraintBundle", "LPResult", "Polyhedron",
    "cross_section", "intersect", "is_empty", "lp_solve",
    "remove_redundant_rows", "tighten", "vertices_2d", "OutputConstraints",
    "Plant", "RegionTriple", "SaturatedLoop", "build_regions",
    "equilibrium_basis", "validate", "lqr_gain", "omega_membership",
    "saturate", "simulate", "verify_set", "Caps", "ControlAuthority",
    "Options", "PropagationResult", "control_authority", "propagate_lower",
    "propagate_nonsat", "propagate_upper", "IsoasResult", "MoasResult",
    "compute_isoas", "compute_moas", "erosion_filter", "membership",
]
