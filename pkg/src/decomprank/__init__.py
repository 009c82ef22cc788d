"""Generate, evaluate and rank constraint-relaxation decompositions of MIPs."""

from .decomp import Decomposition, canonical_key, compute_stats, partition, remove_redundant_constraints
from .lagrange import EvalBudget, EvaluationResult, evaluate
from .model import MipInstance, lp_relaxation, make_instance
from .mps import parse_mps, read_mps, write_mps

__all__ = [
    "Decomposition",
    "EvalBudget",
    "EvaluationResult",
    "MipInstance",
    "canonical_key",
    "compute_stats",
    "evaluate",
    "lp_relaxation",
    "make_instance",
    "parse_mps",
    "partition",
    "read_mps",
    "remove_redundant_constraints",
    "write_mps",
]
