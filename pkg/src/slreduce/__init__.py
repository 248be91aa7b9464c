"""Reduction of safe separation logic entailments to progressing, connected, established ones."""

from .analysis import classify_problem, compute_fv_profile, must_alloc_params
from .errors import SLError
from .parser import parse_formula, parse_problem, parse_sid
from .reduction import reduce_safe_to_pce
from .semantics import check_models, find_counterexample_bounded
from .syntax import EntailmentProblem, Formula, Rule, Sid, SymbolicHeap

__version__ = "0.1.0"

__all__ = [
    "EntailmentProblem", "Formula", "Rule", "SLError", "Sid", "SymbolicHeap", "check_models",
    "classify_problem", "compute_fv_profile", "find_counterexample_bounded", "must_alloc_params",
    "parse_formula", "parse_problem", "parse_sid", "reduce_safe_to_pce",
]
