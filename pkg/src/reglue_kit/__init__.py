"""reglue_kit: desk-scale constructive dynamics for quadratic rational maps."""

from .sphere import (
    INFINITY,
    FamilyMember,
    MobiusTransformation,
    QuadraticRationalMap,
    SpherePoint,
    chordal_distance,
    critical_points,
    evaluate,
    family_member,
    preimages,
    rational_map,
    solve_quadratic,
)

__all__ = [
    "INFINITY",
    "FamilyMember",
    "MobiusTransformation",
    "QuadraticRationalMap",
    "SpherePoint",
    "chordal_distance",
    "critical_points",
    "evaluate",
    "family_member",
    "preimages",
    "rational_map",
    "solve_quadratic",
]
