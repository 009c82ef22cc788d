import math

import pytest
from oracles import enumerate_binary

from decomprank.bnb import solve_mip
from decomprank.model import BINARY, CONTINUOUS, GE, INTEGER, LE, make_instance
from decomprank.sampling import make_rng
from decomprank.simplex import Clock, solve_lp
from decomprank.synthetic import random_binary


def test_knapsack_example():
    inst = make_instance("k", "max", [5, 4, 3], [([4, 3, 2], LE, 6)], [(BINARY, 0, 1)] * 3)
    bound, incumbent, status = solve_mip(inst)
    assert status == "optimal"
    assert bound == incumbent == 8.0
    assert enumerate_binary(inst) == 8.0


def test_continuous_instance_equals_lp():
    inst = make_instance("c", "max", [3, 2], [([1, 1], LE, 4), ([1, 0], LE, 2), ([0, 1], LE, 3)])
    res = solve_mip(inst)
    assert res.status == "optimal"
    assert res.bound == res.incumbent == solve_lp(inst).objective
    assert res.nodes == 1


def test_infeasible_bounds_by_sense():
    rows = [([1, 1], GE, 3)]
    mx = make_instance("i", "max", [1, 1], rows, [(BINARY, 0, 1)] * 2)
    mn = make_instance("i", "min", [1, 1], rows, [(BINARY, 0, 1)] * 2)
    assert tuple(solve_mip(mx)) == (-math.inf, -math.inf, "infeasible")
    assert tuple(solve_mip(mn)) == (math.inf, math.inf, "infeasible")


def test_integer_infeasible_but_lp_feasible():
    # 2x = 1 has an LP solution but no integer one
    inst = make_instance("p", "max", [1], [([2], "=", 1)], [(INTEGER, 0, 3)])
    assert solve_mip(inst).status == "infeasible"


def test_general_integers():
    # max x + y, 2x + 2y <= 7, x, y integer in [0, 5]
    inst = make_instance("g", "max", [1, 1], [([2, 2], LE, 7)], [(INTEGER, 0, 5)] * 2)
    assert tuple(solve_mip(inst))[:2] == (3.0, 3.0)


@pytest.mark.parametrize("seed", range(100))
def test_matches_enumeration(seed):
    rng = make_rng(seed, "bnb-oracle")
    n = int(rng.integers(2, 16))
    m = int(rng.integers(1, 16))
    inst = random_binary(f"b{seed}", n, m, density=float(rng.uniform(0.2, 0.7)), seed=seed,
                         sense=str(rng.choice(["max", "min"])))
    want = enumerate_binary(inst)
    res = solve_mip(inst, rel_gap=0.0)
    assert res.status == "optimal"
    assert abs(res.incumbent - want) <= 1e-9 * (1 + abs(want))
    assert inst.is_feasible(res.x)


def test_mixed_binary_continuous():
    # max 2y + x, x <= 1.5 y, x + y <= 2, y binary, x continuous
    inst = make_instance("m", "max", [1, 2], [([1, -1.5], LE, 0), ([1, 1], LE, 2)],
                         [(CONTINUOUS, 0, 10), (BINARY, 0, 1)])
    res = solve_mip(inst)
    assert abs(res.incumbent - 3.0) <= 1e-9


def test_work_budget_gives_valid_bound():
    inst = random_binary("tl", 15, 12, density=0.6, seed=5)
    exact = enumerate_binary(inst)
    res = solve_mip(inst, time_budget=20, clock=Clock("work"))
    assert res.status in ("time_limit", "optimal")
    assert res.bound >= exact - 1e-9
    if math.isfinite(res.incumbent):
        assert res.incumbent <= exact + 1e-9


def test_root_fallback_returns_lp_bound():
    inst = random_binary("fb", 14, 12, density=0.7, seed=11)
    clock = Clock("work")
    res = solve_mip(inst, time_budget=1, root_grace=1, clock=clock)
    assert res.status == "lp_bound"
    assert res.lp_fallback
    assert abs(res.bound - solve_lp(inst).objective) <= 1e-9
    # the paused root solve is not charged
    assert clock.now() <= 3


def test_node_limit_and_gap_status():
    inst = random_binary("nl", 15, 10, density=0.6, seed=2)
    exact = enumerate_binary(inst)
    res = solve_mip(inst, node_limit=2)
    assert res.status in ("node_limit", "optimal")
    assert res.bound >= exact - 1e-9
    loose = solve_mip(inst, rel_gap=0.5)
    assert loose.status in ("gap", "optimal")
    assert loose.bound >= exact - 1e-9
    assert loose.gap <= 0.5 + 1e-12
    assert loose.incumbent <= exact + 1e-9
