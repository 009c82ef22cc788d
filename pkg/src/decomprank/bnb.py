"""Best-bound-first branch and bound over the dense simplex."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .model import MipInstance
from .simplex import INFEASIBLE, OPTIMAL, TIME_LIMIT, UNBOUNDED, Clock, LpData, solve_arrays

INT_TOL = 1e-6


@dataclass
class MipResult:
    """Outcome of :func:`solve_mip` in the caller's objective sense.

    ``bound`` is a valid dual bound (an upper bound for maximisation);
    ``incumbent`` is the best feasible objective found, or the worst
    infinity when none was found. An infeasible problem has both at the
    worst infinity.
    """

    bound: float
    incumbent: float
    status: str
    x: np.ndarray | None = None
    nodes: int = 0
    lp_fallback: bool = False

    def __iter__(self):
        yield self.bound
        yield self.incumbent
        yield self.status

    @property
    def gap(self) -> float:
        if not (math.isfinite(self.bound) and math.isfinite(self.incumbent)):
            return math.inf
        return abs(self.bound - self.incumbent) / max(abs(self.incumbent), 1e-10)


def _most_fractional(x, integral):
    frac = x - np.floor(x)
    dist = np.minimum(frac, 1.0 - frac)
    dist = np.where(integral, dist, 0.0)
    j = int(np.argmax(dist))
    return j if dist[j] > INT_TOL else -1


def _round_candidates(x, integral, lower, upper):
    for fn in (np.round, np.floor, np.ceil):
        y = x.copy()
        y[integral] = np.clip(fn(x[integral]), lower[integral], upper[integral])
        yield y


def _feasible(data: LpData, instance: MipInstance, x) -> bool:
    return instance.is_feasible(x, tol=1e-7)


def solve_mip(
    instance: MipInstance,
    time_budget: float = math.inf,
    rel_gap: float = 0.0,
    node_limit: int = 1_000_000,
    root_grace: float = 0.0,
    clock: Clock | None = None,
    data: LpData | None = None,
) -> MipResult:
    """Solve ``instance`` to ``rel_gap`` within ``time_budget`` clock units.

    Status is one of ``optimal``, ``gap``, ``time_limit``, ``node_limit``,
    ``infeasible``, ``unbounded`` or ``lp_bound`` (the root LP needed more
    than ``time_budget + root_grace`` and was finished with the clock
    paused; its value is returned as the bound).
    """
    clock = clock if clock is not None else Clock("cpu")
    data = data if data is not None else LpData(instance)
    maxi = data.maximize
    const = data.constant

    def user(v):  # internal minimisation value -> caller's sense
        return (-v if maxi else v) + const

    worst = -math.inf if maxi else math.inf
    start = clock.now()
    deadline = start + time_budget if math.isfinite(time_budget) else None
    integral = data.integral

    root = solve_arrays(data, clock=clock, deadline=deadline)
    fallback = False
    if root.status == TIME_LIMIT:
        grace_deadline = start + time_budget + root_grace if deadline is not None else None
        root = solve_arrays(data, clock=clock, deadline=grace_deadline)
        if root.status == TIME_LIMIT:
            with clock.paused():
                root = solve_arrays(data, clock=clock)
            fallback = True
    if root.status == INFEASIBLE:
        return MipResult(worst, worst, "infeasible", nodes=1)
    if root.status == UNBOUNDED:
        return MipResult(-worst if not maxi else math.inf, worst, "unbounded", nodes=1)

    def internal(sol):
        return float(data.cost[: data.n] @ sol.x)

    if fallback:
        return MipResult(user(internal(root)), worst, "lp_bound", nodes=1, lp_fallback=True)

    inc_val = math.inf
    inc_x = None

    def try_incumbent(x):
        nonlocal inc_val, inc_x
        for y in _round_candidates(x, integral, data.lower, data.upper):
            v = float(data.cost[: data.n] @ y)
            if v < inc_val - 1e-12 and _feasible(data, instance, y):
                inc_val, inc_x = v, y

    nodes = 1
    heap: list = []
    seq = 0

    def consider(sol, lo, hi):
        nonlocal seq, inc_val, inc_x
        val = internal(sol)
        j = _most_fractional(sol.x, integral)
        if j < 0:
            # snap integer columns so the incumbent carries no pivoting residue
            x = sol.x.copy()
            x[integral] = np.round(x[integral])
            snapped = float(data.cost[: data.n] @ x)
            if _feasible(data, instance, x):
                val = snapped
            else:
                x = sol.x.copy()
            if val < inc_val:
                inc_val, inc_x = val, x
            return
        try_incumbent(sol.x)
        if val < inc_val - _prune_tol(inc_val):
            heapq.heappush(heap, (val, seq, lo, hi, sol.basis, sol.x, j))
            seq += 1

    consider(root, data.lower.copy(), data.upper.copy())

    status = "optimal"
    open_bound = math.inf
    while heap:
        val, _, lo, hi, basis, x, j = heapq.heappop(heap)
        if val >= inc_val - _prune_tol(inc_val):
            continue
        if math.isfinite(inc_val) and (inc_val - val) / max(abs(inc_val), 1e-10) <= rel_gap:
            open_bound = val
            status = "optimal" if rel_gap == 0 else "gap"
            break
        if nodes >= node_limit:
            open_bound = val
            status = "node_limit"
            break
        if deadline is not None and clock.now() > deadline:
            open_bound = val
            status = "time_limit"
            break
        interrupted = False
        v = x[j]
        children = []
        down_hi = hi.copy()
        down_hi[j] = math.floor(v)
        children.append((lo, down_hi))
        up_lo = lo.copy()
        up_lo[j] = math.ceil(v)
        children.append((up_lo, hi))
        for clo, chi in children:
            sol = solve_arrays(data, clo, chi, warm=basis, clock=clock, deadline=deadline)
            nodes += 1
            if sol.status == TIME_LIMIT:
                interrupted = True
                break
            if sol.status == OPTIMAL:
                consider(sol, clo, chi)
        if interrupted:
            open_bound = val
            status = "time_limit"
            break

    if heap:
        open_bound = min(open_bound, min(item[0] for item in heap))
    bound = min(open_bound, inc_val)
    if not math.isfinite(bound) and not math.isfinite(inc_val) and status == "optimal":
        return MipResult(worst, worst, "infeasible", nodes=nodes)
    return MipResult(user(bound), user(inc_val) if inc_x is not None else worst, status, inc_x, nodes)


def _prune_tol(inc):
    return 1e-9 * (1.0 + abs(inc)) if math.isfinite(inc) else 0.0

