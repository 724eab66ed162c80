"""Exact Virasoro and Ward-identity oracle."""

from .algebra import (
    RelationReport,
    VirMonomial,
    VirState,
    central_term,
    descendant_state,
    gram_matrix,
    partitions,
    relation_checks,
    vev,
)
from .geometry import (
    BracketDecomposition,
    VectorField,
    connection_rep_check,
    contour_moment,
    delta,
    joukowsky_ward_check,
    parametric_moment,
    witt_bracket,
    witt_commutator_check,
)
from .poly import C, Poly
from .ward import RationalCorrelator, is_symmetric, ope_expand, ward_npoint, ward_subset

__all__ = [
    "BracketDecomposition", "C", "Poly", "RationalCorrelator", "RelationReport",
    "VectorField", "VirMonomial", "VirState", "central_term", "connection_rep_check",
    "contour_moment", "delta", "descendant_state", "gram_matrix", "is_symmetric",
    "joukowsky_ward_check", "ope_expand", "parametric_moment", "partitions",
    "relation_checks", "vev", "ward_npoint", "ward_subset", "witt_bracket",
    "witt_commutator_check",
]
