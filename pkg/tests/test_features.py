import math

import numpy as np
from hypothesis import given, settings, strategies as st

from decomprank.decomp import partition
from decomprank.features import FEATURE_NAMES, RC_FEATURES, extract_features
from decomprank.model import BINARY, CONTINUOUS, GE, INTEGER, LE, make_instance
from decomprank.synthetic import random_binary

PROPORTIONS = [n for n in FEATURE_NAMES if n not in ("subproblem_count", "avg_rc_abs_rhs", "avg_rc_sum_obj")]


def toy():
    # three rows over five mixed columns
    return make_instance(
        "toy", "max", [1, 2, 3, 4, 5],
        [({0: 1, 1: 2}, LE, 4), ({1: 1, 2: 1, 3: 1}, GE, -2), ({3: 1, 4: 3}, LE, 6)],
        [(BINARY, 0, 1), (INTEGER, 0, 5), (CONTINUOUS, 0, 9), (CONTINUOUS, 0, 9), (BINARY, 0, 1)],
    )


def test_no_relaxation_zero_border_features():
    inst = toy()
    f = extract_features(inst, partition(inst, []))
    assert f.relaxed_prop == 0
    assert all(getattr(f, n) == 0 for n in RC_FEATURES)
    assert f.border_nz_prop == 0


def test_all_relaxed_gives_singletons():
    inst = toy()
    d = partition(inst, [0, 1, 2])
    f = extract_features(inst, d)
    assert f.relaxed_prop == 1
    assert len(d.subproblems) == inst.num_vars
    assert f.subproblem_count == inst.num_vars / inst.num_constraints
    assert f.single_var_subproblem_prop == 1
    assert f.border_nz_prop == 1


def test_rc_aggregates_direct_means():
    inst = toy()
    f = extract_features(inst, partition(inst, [0, 1]))
    # row 0: 2 of 5 columns, both integral, |rhs| 4, objective 1 + 2
    # row 1: 3 of 5 columns, one integral, |rhs| 2, objective 2 + 3 + 4
    assert math.isclose(f.avg_rc_nonzero_prop, (2 / 5 + 3 / 5) / 2)
    assert math.isclose(f.avg_rc_bin_int_prop, (1.0 + 1 / 3) / 2)
    assert math.isclose(f.avg_rc_abs_rhs, (4 + 2) / 2)
    assert math.isclose(f.avg_rc_sum_obj, (3 + 9) / 2)


def test_subproblem_moments():
    inst = toy()
    d = partition(inst, [1])
    f = extract_features(inst, d)
    sizes = np.array([sp.size for sp in d.subproblems]) / inst.num_vars
    assert math.isclose(f.largest_subproblem_var_prop, sizes.max())
    assert math.isclose(f.min_subproblem_var_prop, sizes.min())
    assert math.isclose(f.mean_subproblem_var_prop, sizes.mean())
    assert math.isclose(f.std_subproblem_var_prop, sizes.std())
    assert f.min_block_density == 1.0 == f.max_block_density


@settings(max_examples=60)
@given(st.integers(0, 10_000), st.lists(st.integers(0, 9), max_size=10))
def test_proportions_in_unit_interval(seed, relaxed):
    inst = random_binary(f"p{seed}", 9, 10, density=0.4, seed=seed)
    f = extract_features(inst, partition(inst, relaxed))
    assert len(f.as_array()) == len(FEATURE_NAMES) == 16
    for name in PROPORTIONS:
        assert -1e-12 <= getattr(f, name) <= 1 + 1e-12, name
