"""Single-shot Lagrangian evaluation of a decomposition.

The LP relaxation is solved once per instance; its optimal duals price the
relaxed rows, the remaining blocks are solved independently under a CPU
(or work) budget, and the sum of their dual bounds is the Lagrangian bound.
"""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .bnb import MipResult, solve_mip
from .decomp import Decomposition
from .model import EQ, LE, Constraint, MipInstance
from .mps import save_mps
from .simplex import OPTIMAL, Clock, LpSolution, relation_sign_ok, solve_lp

SIGN_TOL = 1e-9


@dataclass(frozen=True)
class EvalBudget:
    """Budget for one decomposition evaluation.

    ``total_cpu`` and ``root_grace`` are measured on the chosen clock:
    CPU seconds for ``clock="cpu"`` and simplex pivots for ``clock="work"``.
    """

    total_cpu: float = 10.0
    subproblem_gap: float = 0.01
    root_grace: float = 60.0
    node_limit: int = 1_000_000
    clock: str = "cpu"
    reference_cpu: float | None = None

    def __post_init__(self):
        if not (self.total_cpu > 0 and self.subproblem_gap > 0 and self.root_grace > 0 and self.node_limit > 0):
            raise ValueError("budget fields must be positive")
        if self.clock not in ("cpu", "work"):
            raise ValueError(f"unknown clock {self.clock!r}")


@dataclass
class InstanceContext:
    """Per-instance data shared by every evaluation: LP solution and best primal."""

    lp: LpSolution
    best_primal: float


@dataclass
class EvaluationResult:
    lr_bound: float
    lp_bound: float
    best_primal: float
    solve_time: float
    time_s: float
    gap_pct: float
    statuses: list = field(default_factory=list)
    status: str = "ok"
    degenerate_gap: bool = False
    normalized_gap: float | None = None
    normalized_time: float | None = None
    score: float | None = None

    @property
    def valid(self) -> bool:
        return self.status == "ok"

    def to_record(self) -> dict:
        rec = asdict(self)
        for k in ("normalized_gap", "normalized_time", "score"):
            rec.pop(k)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "EvaluationResult":
        return cls(**{k: rec[k] for k in cls.__dataclass_fields__ if k in rec})


def optimality_gap(ub: float, lb: float) -> float:
    """Percentage gap ``|(ub - lb) / ub| * 100`` with ``|ub|`` floored at 1e-10."""
    if not (math.isfinite(ub) and math.isfinite(lb)):
        return math.inf
    return abs((ub - lb) / max(abs(ub), 1e-10)) * 100.0


def gap_is_degenerate(ub: float) -> bool:
    """True when ``ub`` is so close to zero that the gap hits the guard."""
    return math.isfinite(ub) and abs(ub) < 1e-10


def allocate_budgets(sizes, cpu: float) -> list[float]:
    """Split ``cpu`` in proportion to squared subproblem sizes.

    Budgets come back in input order. The largest subproblem (the last one
    in ascending order) takes whatever the others leave, so the total is
    exactly ``cpu`` up to one rounding.
    """
    sizes = [float(v) for v in sizes]
    if not sizes:
        return []
    order = sorted(range(len(sizes)), key=lambda k: (sizes[k], k))
    total_sq = math.fsum(v * v for v in sizes)
    out = [0.0] * len(sizes)
    for k in order[:-1]:
        out[k] = sizes[k] ** 2 / total_sq * cpu if total_sq > 0 else 0.0
    out[order[-1]] = cpu - math.fsum(out[k] for k in order[:-1])
    return out


def check_dual_signs(instance: MipInstance, duals, rows) -> None:
    for i in rows:
        rel = instance.constraints[i].relation
        if not relation_sign_ok(rel, float(duals[i]), instance.is_maximize, SIGN_TOL):
            raise ValueError(
                f"multiplier {duals[i]:g} on {rel} row {instance.constraints[i].name} has the wrong sign"
            )


def build_lagrangian_subproblems(instance: MipInstance, decomp: Decomposition, duals):
    """Dualise the relaxed rows of ``decomp`` with multipliers ``duals``.

    Returns ``(subproblems, constant)``. ``constant`` is ``lambda . b`` over
    the relaxed rows; each subproblem keeps its own rows and variables and
    has the objective ``c - A_R^T lambda`` restricted to its block. The
    instance's own objective constant is not included.
    """
    duals = np.asarray(duals, dtype=float)
    relaxed = list(decomp.relaxed)
    check_dual_signs(instance, duals, relaxed)
    lam = np.zeros(instance.num_constraints)
    lam[relaxed] = duals[relaxed]
    if relaxed:
        reduced = instance.c - instance.matrix[relaxed].T @ lam[relaxed]
        constant = float(lam[relaxed] @ instance.rhs[relaxed])
    else:
        reduced = np.array(instance.c)
        constant = 0.0
    subs = []
    for k, sp in enumerate(decomp.subproblems):
        local = {j: pos for pos, j in enumerate(sp.variables)}
        cons = []
        for i in sp.constraints:
            con = instance.constraints[i]
            cons.append(
                Constraint(con.name, tuple(local[j] for j in con.indices), con.coefs, con.relation, con.rhs)
            )
        subs.append(
            MipInstance(
                name=f"{instance.name}/sp{k}",
                sense=instance.sense,
                objective=tuple(float(reduced[j]) for j in sp.variables),
                constraints=tuple(cons),
                variables=tuple(instance.variables[j] for j in sp.variables),
            )
        )
    return subs, constant


def single_variable_bound(sub: MipInstance) -> MipResult:
    """Solve a one-variable subproblem from its bounds and its own rows."""
    var = sub.variables[0]
    lo, hi = var.lower, var.upper
    for con in sub.constraints:
        if not con.indices:
            continue
        a = con.coefs[0]
        v = con.rhs / a
        rel = con.relation
        if rel == EQ:
            lo, hi = max(lo, v), min(hi, v)
        elif (rel == LE) == (a > 0):
            hi = min(hi, v)
        else:
            lo = max(lo, v)
    if var.is_integral:
        lo = math.ceil(lo - 1e-9) if math.isfinite(lo) else lo
        hi = math.floor(hi + 1e-9) if math.isfinite(hi) else hi
    worst = -math.inf if sub.is_maximize else math.inf
    if lo > hi + 1e-9:
        return MipResult(worst, worst, "infeasible")
    r = sub.objective[0] if sub.is_maximize else -sub.objective[0]
    if r > 0:
        x = hi
    elif r < 0:
        x = lo
    else:
        x = lo if math.isfinite(lo) else hi if math.isfinite(hi) else 0.0
    if not math.isfinite(x):
        return MipResult(-worst, worst, "unbounded")
    val = sub.objective[0] * x
    return MipResult(val, val, "optimal", np.array([x]))


def prepare_instance(instance: MipInstance, budget: EvalBudget) -> InstanceContext:
    """LP relaxation and reference primal value, computed once per instance."""
    lp = solve_lp(instance)
    if lp.status != OPTIMAL:
        return InstanceContext(lp, math.nan)
    ref_budget = budget.reference_cpu if budget.reference_cpu is not None else budget.total_cpu
    res = solve_mip(
        instance,
        time_budget=ref_budget,
        rel_gap=0.0,
        node_limit=budget.node_limit,
        root_grace=budget.root_grace,
        clock=Clock(budget.clock),
    )
    return InstanceContext(lp, res.incumbent)


def evaluate(
    instance: MipInstance,
    decomp: Decomposition,
    budget: EvalBudget = EvalBudget(),
    context: InstanceContext | None = None,
    solver=None,
) -> EvaluationResult:
    """Lagrangian bound of ``decomp`` at the LP-optimal duals.

    Subproblems are solved smallest first. Each gets its share from
    :func:`allocate_budgets`; the largest gets all time still unused.
    ``solver(sub, time_budget, budget, clock)`` may replace the internal
    branch and bound.
    """
    if context is None:
        context = prepare_instance(instance, budget)
    lp = context.lp
    if lp.status != OPTIMAL:
        return EvaluationResult(math.nan, math.nan, math.nan, 0.0, 0.0, math.inf, [], f"lp_{lp.status}")
    subs, constant = build_lagrangian_subproblems(instance, decomp, lp.duals)
    clock = Clock(budget.clock)
    cpu_start = time.process_time()
    start = clock.now()

    results: list[MipResult | None] = [None] * len(subs)
    big = [k for k, s in enumerate(subs) if s.num_vars > 1]
    for k, s in enumerate(subs):
        if s.num_vars == 1:
            results[k] = single_variable_bound(s)
    shares = allocate_budgets([subs[k].num_vars for k in big], budget.total_cpu)
    order = sorted(range(len(big)), key=lambda q: (subs[big[q]].num_vars, q))
    for pos, q in enumerate(order):
        k = big[q]
        if pos == len(order) - 1:
            t = max(budget.total_cpu - (clock.now() - start), 0.0)
        else:
            t = shares[q]
        if solver is not None:
            results[k] = solver(subs[k], t, budget, clock)
        else:
            results[k] = solve_mip(
                subs[k],
                time_budget=t,
                rel_gap=budget.subproblem_gap,
                node_limit=budget.node_limit,
                root_grace=budget.root_grace,
                clock=clock,
            )

    solve_time = clock.now() - start
    time_s = time.process_time() - cpu_start
    statuses = [r.status for r in results]
    lr = constant + instance.objective_constant + math.fsum(r.bound for r in results)
    status = "ok"
    if "unbounded" in statuses:
        status = "unbounded_subproblem"
    elif "infeasible" in statuses:
        status = "infeasible_subproblem"
    best = context.best_primal
    ub, lb = (lr, best) if instance.is_maximize else (best, lr)
    gap = optimality_gap(ub, lb)
    return EvaluationResult(
        lr_bound=lr,
        lp_bound=lp.objective,
        best_primal=best,
        solve_time=solve_time,
        time_s=time_s,
        gap_pct=gap,
        statuses=statuses,
        status=status,
        degenerate_gap=gap_is_degenerate(ub),
    )


class ExternalSolver:
    """Run a user command on each subproblem written as an MPS file.

    ``command`` may contain ``{mps}`` and ``{time}`` placeholders. The
    command must print lines ``bound <value>``, optionally ``incumbent
    <value>`` and ``status <word>``; other lines are ignored. The wall time
    of the call is charged to a CPU clock; a work clock is charged one unit.
    """

    def __init__(self, command: str):
        self.command = command

    def __call__(self, sub: MipInstance, time_budget: float, budget: EvalBudget, clock: Clock) -> MipResult:
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "sub.mps")
            save_mps(sub, path)
            cmd = [part.format(mps=path, time=time_budget) for part in shlex.split(self.command)]
            proc = subprocess.run(cmd, capture_output=True, text=True, check=False)
        clock.tick()
        if proc.returncode != 0:
            raise RuntimeError(f"external solver exited with {proc.returncode}: {proc.stderr.strip()}")
        return parse_solver_output(proc.stdout, sub.is_maximize)


def parse_solver_output(text: str, maximize: bool) -> MipResult:
    worst = -math.inf if maximize else math.inf
    fields = {}
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 2 and parts[0] in ("bound", "incumbent", "status"):
            fields[parts[0]] = parts[1]
    if "bound" not in fields:
        raise ValueError("external solver output has no 'bound' line")
    return MipResult(
        bound=float(fields["bound"]),
        incumbent=float(fields.get("incumbent", worst)),
        status=fields.get("status", "external"),
    )


__all__ = [
    "EvalBudget",
    "EvaluationResult",
    "ExternalSolver",
    "InstanceContext",
    "allocate_budgets",
    "build_lagrangian_subproblems",
    "evaluate",
    "gap_is_degenerate",
    "optimality_gap",
    "prepare_instance",
    "single_variable_bound",
]
