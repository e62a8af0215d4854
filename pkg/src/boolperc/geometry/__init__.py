"""Convex-geometry layer: bodies, distance predicate, diameters, boxes."""

from .bodies import (ConvexBody, CrossPolytope, Ellipsoid, OrientedBox,
                     PredicateConvergenceError, Rotation, VertexPolytope,
                     as_vector)
from .diameters import (DiameterSequence, ProjectedRegion, diameter_sequence,
                        project)
from .gjk import distance, distance_to_point, distance_to_point_set, intersects
from .inscribed import cross_polytope_contains, inscribed_box

__all__ = [
    "ConvexBody", "CrossPolytope", "Ellipsoid", "OrientedBox",
    "VertexPolytope", "Rotation", "PredicateConvergenceError", "as_vector",
    "DiameterSequence", "ProjectedRegion", "diameter_sequence", "project",
    "distance", "distance_to_point", "distance_to_point_set", "intersects",
    "cross_polytope_contains", "inscribed_box",
]
