"""Regions that must contain the minimizer of a sum of two strongly convex functions."""

from .convex_sets import Ball, Box2D, ConvexBody, Polytope, body_from_dict, distance_to_boundary
from .errors import MinRegError
from .geometry import ProblemConfig, ReducedPoint, canonical_frame, reduce
from .region_p1 import derived_params, in_M_hat, t_n_residual
from .region_p2 import in_N_hat, constrained_tracing_precondition

__all__ = [
    "Ball",
    "Box2D",
    "ConvexBody",
    "MinRegError",
    "Polytope",
    "ProblemConfig",
    "ReducedPoint",
    "body_from_dict",
    "canonical_frame",
    "derived_params",
    "distance_to_boundary",
    "in_M_hat",
    "in_N_hat",
    "reduce",
    "t_n_residual",
    "constrained_tracing_precondition",
]

__version__ = "0.1.0"
