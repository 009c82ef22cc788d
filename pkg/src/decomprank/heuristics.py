"""A-priori decomposition quality scores from the literature.

RBA and GCG-OS are "lower is better"; Goodness and Max-White are "higher is
better". All four only look at :class:`DecompositionStats`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .decomp import DecompositionStats, canonical_key, compute_stats

# name -> True when larger values are better
ORIENTATION = {"rba": False, "goodness": True, "gcg_os": False, "max_white": True}
HEURISTICS = tuple(ORIENTATION)


@dataclass(frozen=True)
class GoodnessParams:
    decay: float = 5.0

    def __post_init__(self):
        if not self.decay > 0:
            raise ValueError("Goodness decay must be positive")


def rba(stats: DecompositionStats) -> float:
    """Relative border area."""
    m, n, ml, nl = stats.m, stats.n, stats.m_l, stats.n_l
    return (ml * n + m * nl - ml * nl) / (m * n)


def goodness_q(stats: DecompositionStats) -> float:
    total = stats.block_nonzero_total
    if total == 0:
        return 0.0
    return sum((nz / total) * (1.0 - nz / total) for nz in stats.block_nonzeros)


def goodness_p(stats: DecompositionStats, params: GoodnessParams = GoodnessParams()) -> float:
    return math.exp(-params.decay * stats.m_l / stats.m)


def goodness(stats: DecompositionStats, params: GoodnessParams = GoodnessParams()) -> float:
    return goodness_q(stats) * goodness_p(stats, params)


def gcg_os(stats: DecompositionStats) -> float:
    # min over no blocks counts as a perfectly dense block
    dmin = min(stats.block_densities, default=1.0)
    return 0.6 * stats.m_l / stats.m + 0.01 + 0.2 * (1.0 - dmin)


def max_white(stats: DecompositionStats) -> float:
    return 1.0 - (stats.s + stats.t) / (stats.n * stats.m)


def all_scores(stats: DecompositionStats, params: GoodnessParams = GoodnessParams()) -> dict:
    return {
        "rba": rba(stats),
        "goodness": goodness(stats, params),
        "gcg_os": gcg_os(stats),
        "max_white": max_white(stats),
    }


def ranking_value(name: str, value: float) -> float:
    """Map a heuristic value onto a "lower ranks first" scale."""
    return -value if ORIENTATION[name] else value


def score_all(instance, decomps, params: GoodnessParams = GoodnessParams()):
    """Score every decomposition and rank it under each heuristic.

    Returns ``(rows, order)``: ``rows`` is a list of dicts with the canonical
    key and the four scores, ``order[name]`` lists keys best-first with ties
    broken by key.
    """
    rows = []
    for d in decomps:
        row = {"key": canonical_key(d)}
        row.update(all_scores(compute_stats(instance, d), params))
        rows.append(row)
    order = {
        name: [r["key"] for r in sorted(rows, key=lambda r: (ranking_value(name, r[name]), r["key"]))]
        for name in HEURISTICS
    }
    return rows, order
