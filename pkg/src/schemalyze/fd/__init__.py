"""Functional dependency identifiers and propagation."""

from schemalyze.fd.engine import (
    CONST_ID_MODES,
    FdSet,
    TransSet,
    saturate,
    step_constraint_fds,
    step_equate_rhs,
    step_position_mapped,
    step_position_preserving,
    step_recursion,
    step_transitive,
    step_udf,
    step_union,
    trans_set,
)
from schemalyze.fd.ids import (
    DEFAULT_DEPTH_CAP,
    BaseNode,
    Col,
    ConstLeaf,
    Fd,
    IdTerm,
    depth,
    remap_id,
    replace_in_id,
)

__all__ = [
    "CONST_ID_MODES", "DEFAULT_DEPTH_CAP", "BaseNode", "Col", "ConstLeaf", "Fd", "FdSet", "IdTerm", "TransSet",
    "depth", "remap_id", "replace_in_id", "saturate", "step_constraint_fds", "step_equate_rhs",
    "step_position_mapped", "step_position_preserving", "step_recursion", "step_transitive",
    "step_udf", "step_union", "trans_set",
]
