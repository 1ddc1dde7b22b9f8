"""Termination-guided resource bounds for integer transition systems."""
from .bound_solver import Bound, MagnitudePoly, asymptotic_degree, eval_bound, solve
from .crs_gen import CRS, CostEquation, embed_ranking_functions, emit_crs, generate_crs, make_conditional, parse_crs
from .its_model import Atom, LinTerm, Transition, TransitionSystem, emit_its, parse_its, run
from .pipeline import Report, analyze_ts, check_soundness
from .size_rel import SizeRelation, size_relations
from .termination import analyze, prove_component, verify_proof
from .transform import transform_system, validate

__all__ = [
    "Bound",
    "MagnitudePoly",
    "asymptotic_degree",
    "eval_bound",
    "solve",
    "CRS",
    "CostEquation",
    "embed_ranking_functions",
    "emit_crs",
    "generate_crs",
    "make_conditional",
    "parse_crs",
    "Atom",
    "LinTerm",
    "Transition",
    "TransitionSystem",
    "emit_its",
    "parse_its",
    "run",
    "Report",
    "analyze_ts",
    "check_soundness",
    "SizeRelation",
    "size_relations",
    "analyze",
    "prove_component",
    "verify_proof",
    "transform_system",
    "validate",
]

__version__ = "0.1.0"
