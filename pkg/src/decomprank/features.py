"""Decomposition feature vectors fed to the learned rankers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomp import Decomposition, DecompositionStats, compute_stats
from .model import MipInstance

RC_FEATURES = ("avg_rc_nonzero_prop", "avg_rc_bin_int_prop", "avg_rc_abs_rhs", "avg_rc_sum_obj")


@dataclass(frozen=True)
class DecompositionFeatureVector:
    relaxed_prop: float
    subproblem_count: float
    largest_subproblem_var_prop: float
    min_subproblem_var_prop: float
    mean_subproblem_var_prop: float
    std_subproblem_var_prop: float
    min_block_density: float
    mean_block_density: float
    max_block_density: float
    std_block_density: float
    single_var_subproblem_prop: float
    border_nz_prop: float
    avg_rc_nonzero_prop: float
    avg_rc_bin_int_prop: float
    avg_rc_abs_rhs: float
    avg_rc_sum_obj: float

    @classmethod
    def field_names(cls) -> list[str]:
        return list(cls.__dataclass_fields__)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.field_names()], dtype=float)


FEATURE_NAMES = tuple(DecompositionFeatureVector.field_names())


def _moments(values):
    if len(values) == 0:
        return 0.0, 0.0, 0.0, 0.0
    v = np.asarray(values, dtype=float)
    return float(v.min()), float(v.mean()), float(v.max()), float(v.std())


def extract_features(
    instance: MipInstance, decomp: Decomposition, stats: DecompositionStats | None = None
) -> DecompositionFeatureVector:
    """Subproblem, border and relaxed-row statistics of one decomposition.

    Proportions use the instance totals (``n`` variables, ``M`` rows,
    all nonzeros). Relaxed-row aggregates are means over the relaxed rows
    and 0 when nothing is relaxed.
    """
    if stats is None:
        stats = compute_stats(instance, decomp)
    n, m = instance.num_vars, instance.num_constraints
    nz_total = instance.nonzeros
    var_props = [v / n for v in stats.block_vars]
    vmin, vmean, _, vstd = _moments(var_props)
    dmin, dmean, dmax, dstd = _moments(stats.block_densities)

    rc = np.zeros(4)
    if decomp.relaxed:
        kinds = instance.integral_mask
        c = instance.c
        for i in decomp.relaxed:
            con = instance.constraints[i]
            idx = list(con.indices)
            rc[0] += len(idx) / n
            rc[1] += float(kinds[idx].mean()) if idx else 0.0
            rc[2] += abs(con.rhs)
            rc[3] += float(c[idx].sum()) if idx else 0.0
        rc /= len(decomp.relaxed)

    return DecompositionFeatureVector(
        relaxed_prop=stats.m_l / m if m else 0.0,
        subproblem_count=stats.K / m if m else float(stats.K),
        largest_subproblem_var_prop=stats.largest_subproblem_vars / n,
        min_subproblem_var_prop=vmin,
        mean_subproblem_var_prop=vmean,
        std_subproblem_var_prop=vstd,
        min_block_density=dmin,
        mean_block_density=dmean,
        max_block_density=dmax,
        std_block_density=dstd,
        single_var_subproblem_prop=stats.single_var_subproblems / stats.K if stats.K else 0.0,
        border_nz_prop=stats.border_nz / nz_total if nz_total else 0.0,
        avg_rc_nonzero_prop=float(rc[0]),
        avg_rc_bin_int_prop=float(rc[1]),
        avg_rc_abs_rhs=float(rc[2]),
        avg_rc_sum_obj=float(rc[3]),
    )
