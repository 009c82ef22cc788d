import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decomprank.model import (
    BINARY,
    CONTINUOUS,
    EQ,
    GE,
    INF,
    INTEGER,
    LE,
    Constraint,
    MipInstance,
    Variable,
    extract_instance_features,
    instances_equal,
    lp_relaxation,
    make_instance,
)
from decomprank.mps import MpsError, MpsSemanticError, parse_mps, read_mps, save_mps, write_mps
from decomprank.sampling import make_rng

SMALL = """\
NAME tiny
ROWS
 N obj
 L c1
COLUMNS
    x obj 1 c1 1
    y obj 1 c1 1
RHS
    rhs c1 4
ENDATA
"""

SMALL_INT = """\
NAME tiny
ROWS
 N obj
 L c1
COLUMNS
    MARKER 'MARKER' 'INTORG'
    x obj 1 c1 1
    y obj 1 c1 1
    MARKER 'MARKER' 'INTEND'
RHS
    rhs c1 4
ENDATA
"""

RANGED = """\
NAME ranged
OBJSENSE
    MAX
ROWS
 N  profit
 L  cap
 G  demand
 E  balance
 E  mix
COLUMNS
    a  profit  3   cap      2
    a  demand  1
    MARKER  'MARKER'  'INTORG'
    b  profit  -1  cap      1
    b  balance 1
    c  profit  2   demand   1
    c  mix     4
    MARKER  'MARKER'  'INTEND'
    d  profit  1   balance  -1
    d  mix     1
    e  profit  0.5 cap      1
    e  mix     -2
RHS
    rhs profit -7
    rhs cap 10  demand 2
    rhs balance 0  mix 3
RANGES
    rng cap 4  demand 5
    rng balance 2  mix -1
BOUNDS
 UP bnd b 8
 BV bnd c
 FR bnd d
 LO bnd e -1
 UP bnd e 6.5
ENDATA
"""


def test_small_lp_counts():
    inst = parse_mps(SMALL)
    assert (inst.num_vars, inst.num_constraints, inst.nonzeros) == (2, 1, 2)
    assert inst.sense == "min"
    assert all(v.kind == CONTINUOUS for v in inst.variables)


def test_integer_marker_without_bounds_means_binary():
    inst = parse_mps(SMALL_INT)
    assert [v.kind for v in inst.variables] == [BINARY, BINARY]
    assert all((v.lower, v.upper) == (0.0, 1.0) for v in inst.variables)


def _hand_built_ranged():
    v = (
        Variable("a", CONTINUOUS, 0.0, INF),
        Variable("b", INTEGER, 0.0, 8.0),
        Variable("c", BINARY, 0.0, 1.0),
        Variable("d", CONTINUOUS, -INF, INF),
        Variable("e", CONTINUOUS, -1.0, 6.5),
    )
    cons = (
        Constraint("cap", (0, 1, 4), (2.0, 1.0, 1.0), LE, 10.0),
        Constraint("demand", (0, 2), (1.0, 1.0), GE, 2.0),
        Constraint("balance", (1, 3), (1.0, -1.0), GE, 0.0),
        Constraint("mix", (2, 3, 4), (4.0, 1.0, -2.0), LE, 3.0),
        # companions carry the other side of each range
        Constraint("cap__range", (0, 1, 4), (2.0, 1.0, 1.0), GE, 6.0),
        Constraint("demand__range", (0, 2), (1.0, 1.0), LE, 7.0),
        Constraint("balance__range", (1, 3), (1.0, -1.0), LE, 2.0),
        Constraint("mix__range", (2, 3, 4), (4.0, 1.0, -2.0), GE, 2.0),
    )
    return MipInstance("ranged", "max", (3.0, -1.0, 2.0, 1.0, 0.5), cons, v, objective_constant=7.0)


def test_ranges_and_bounds_match_hand_built_instance():
    got = parse_mps(RANGED)
    want = _hand_built_ranged()
    assert got == want


def test_malformed_header_reports_line():
    text = SMALL.replace("COLUMNS", "COLUMNZ")
    with pytest.raises(MpsError) as err:
        parse_mps(text)
    assert err.value.line == 5


def test_undeclared_row_is_semantic_error():
    with pytest.raises(MpsSemanticError):
        parse_mps(SMALL.replace("y obj 1 c1 1", "y obj 1 c9 1"))


def test_duplicate_entry_is_semantic_error():
    with pytest.raises(MpsSemanticError):
        parse_mps(SMALL.replace("y obj 1 c1 1", "y obj 1 c1 1\n    x c1 2"))


def test_two_variable_round_trip():
    inst = make_instance("two", "max", [1, 2], [([1, 1], LE, 3)], [(INTEGER, 0, 5), (CONTINUOUS, -2, 4)])
    assert parse_mps(write_mps(inst)) == inst


def test_infinite_upper_bound_not_written():
    inst = make_instance("inf", "min", [1, 1], [([1, 2], GE, 1)])
    text = write_mps(inst).decode()
    assert " UP " not in text
    assert parse_mps(text) == inst


def _random_instance(seed):
    rng = make_rng(seed, "mps-roundtrip")
    n = int(rng.integers(1, 11))
    m = int(rng.integers(0, 8))
    kinds = []
    for _ in range(n):
        k = str(rng.choice([BINARY, INTEGER, CONTINUOUS]))
        if k == BINARY:
            kinds.append((BINARY, 0, 1))
        else:
            lo = float(rng.choice([0.0, -3.0, -INF, 1.5]))
            hi = float(rng.choice([INF, 7.0, 2.25]))  # includes integer [0, inf)
            if lo > hi:
                lo, hi = hi, lo
            kinds.append((k, lo, hi))
    rows = []
    for _ in range(m):
        coefs = {int(j): float(rng.normal()) for j in range(n) if rng.random() < 0.5}
        rows.append((coefs, str(rng.choice([LE, GE, EQ])), float(rng.normal() * 5)))
    obj = rng.normal(size=n).round(6)
    return make_instance(f"r{seed}", str(rng.choice(["min", "max"])), obj, rows, kinds,
                         objective_constant=float(rng.integers(-3, 4)))


@pytest.mark.parametrize("seed", range(20))
def test_random_round_trip(seed, tmp_path):
    inst = _random_instance(seed)
    path = tmp_path / f"{inst.name}.mps"
    save_mps(inst, path)
    assert read_mps(path) == inst


def test_lp_relaxation():
    cont = make_instance("c", "min", [1, 1], [([1, 1], GE, 1)])
    assert lp_relaxation(cont) is cont
    mixed = make_instance("m", "min", [1, 1, 1], [([1, 1, 1], GE, 1)],
                          [(BINARY, 0, 1), (INTEGER, 0, 4), (CONTINUOUS, 0, INF)])
    relaxed = lp_relaxation(mixed)
    assert relaxed.variables[0] == Variable("x0", CONTINUOUS, 0.0, 1.0)
    assert extract_instance_features(relaxed).prop_continuous == 1.0


def test_instance_features_basic():
    inst = make_instance("f", "max", [1, 2, 3, 4], [([1, 1, 0, 0], LE, 1)],
                         [(BINARY, 0, 1)] * 2 + [(CONTINUOUS, 0, 1)] * 2)
    assert extract_instance_features(inst).prop_binary == 0.5
    dense = make_instance("d", "max", [1, 1, 1], [([1, 1, 1], LE, 1)] * 3)
    assert extract_instance_features(dense).matrix_density == 1.0
    with pytest.raises(ValueError):
        extract_instance_features(make_instance("e", "max", [1], []))


def test_k16x240b_shape_features():
    # 240 binary and 240 continuous columns; 224 rows of 4 plus 32 rows of 2 nonzeros
    n, m = 480, 256
    rows = []
    for i in range(m):
        width = 4 if i < 224 else 2
        rows.append(({(width * i + k) % n: 1 for k in range(width)}, LE, 1))
    inst = make_instance("k16x240b", "min", np.ones(n), rows, [(BINARY, 0, 1)] * 240 + [(CONTINUOUS, 0, INF)] * 240)
    f = extract_instance_features(inst)
    assert (f.num_vars, f.num_constraints, f.num_nonzeros) == (480, 256, 960)
    assert f.prop_binary == 0.5
    assert math.isclose(f.matrix_density, 960 / (480 * 256), rel_tol=0, abs_tol=1e-15)


@settings(max_examples=40)
@given(st.integers(min_value=0, max_value=10_000))
def test_round_trip_property(seed):
    inst = _random_instance(seed)
    assert instances_equal(parse_mps(write_mps(inst)), inst)


def test_invalid_instances_rejected():
    with pytest.raises(ValueError):
        make_instance("bad", "max", [1], [], [(BINARY, 0, 2)])
    with pytest.raises(ValueError):
        make_instance("bad", "max", [1], [({0: 1, 3: 1}, LE, 1)])
    with pytest.raises(ValueError):
        make_instance("bad", "sideways", [1], [])
