"""Vector bundles on finite metric spaces as projection-valued fields."""

__version__ = "0.1.0"

from .errors import BundleError, NumericFailure, PreconditionError
from .extension import lambda_star, lift_path, lift_projection, mcshane_extend, extend_hermitian
from .fields import (
    Frame,
    MatrixField,
    ProjectionField,
    frame_to_projection,
    lipschitz_constant,
    rank1_field,
    restrict,
    sup_distance,
)
from .hermitian import jacobi_eigh, spectral_cut
from .homotopy import (
    chained_join,
    component_graph,
    extension_uniqueness,
    fiberwise_join,
    join_projections,
    transport,
)
from .metric import CoupledSpace, FiniteMetricSpace, couple_by_correspondence, eps_density

__all__ = [
    "BundleError", "CoupledSpace", "FiniteMetricSpace", "Frame", "MatrixField", "NumericFailure",
    "PreconditionError", "ProjectionField", "chained_join", "component_graph",
    "couple_by_correspondence", "eps_density", "extend_hermitian", "extension_uniqueness",
    "fiberwise_join", "frame_to_projection", "jacobi_eigh", "join_projections", "lambda_star",
    "lift_path", "lift_projection", "lipschitz_constant", "mcshane_extend", "rank1_field",
    "restrict", "spectral_cut", "sup_distance", "transport",
]
