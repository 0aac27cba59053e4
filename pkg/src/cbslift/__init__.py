"""Gadget composition, lifting and proof-complexity benchmark tooling."""

__version__ = "0.1.0"

from .core_csp import Constraint, Csp, SearchProblem, canonical_search, read_dimacs, write_dimacs
from .errors import CbsError
from .formulas import pebbling_formula, tseitin_formula
from .gadgets import Gadget, jump_gadget, qcs_gadget, verify_versatility, ver_gadget
from .graphs import grid_graph, hxp_graph, pyramid

__all__ = [
    "CbsError", "Constraint", "Csp", "Gadget", "SearchProblem", "canonical_search", "grid_graph",
    "hxp_graph", "jump_gadget", "pebbling_formula", "pyramid", "qcs_gadget", "read_dimacs",
    "tseitin_formula", "ver_gadget", "verify_versatility", "write_dimacs",
]
