"""MIP data model: instances, LP relaxation and instance-level features."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

INF = math.inf

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"
KINDS = (BINARY, INTEGER, CONTINUOUS)

LE, EQ, GE = "<=", "=", ">="
RELATIONS = (LE, EQ, GE)

MAXIMIZE, MINIMIZE = "max", "min"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = CONTINUOUS
    lower: float = 0.0
    upper: float = INF

    @property
    def is_integral(self) -> bool:
        return self.kind != CONTINUOUS


@dataclass(frozen=True)
class Constraint:
    """One row ``sum_j coefs[j] * x[indices[j]]  (relation)  rhs``."""

    name: str
    indices: tuple[int, ...]
    coefs: tuple[float, ...]
    relation: str = LE
    rhs: float = 0.0

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class MipInstance:
    """Immutable mixed-integer program.

    Rows keep their sparse form; dense arrays for the solvers are derived
    lazily and cached on first use.
    """

    name: str
    sense: str
    objective: tuple[float, ...]
    constraints: tuple[Constraint, ...]
    variables: tuple[Variable, ...]
    objective_constant: float = 0.0

    def __post_init__(self):
        if self.sense not in (MAXIMIZE, MINIMIZE):
            raise ValueError(f"unknown objective sense {self.sense!r}")
        n = len(self.variables)
        if len(self.objective) != n:
            raise ValueError("objective length does not match variable count")
        for v in self.variables:
            if v.kind not in KINDS:
                raise ValueError(f"variable {v.name}: unknown kind {v.kind!r}")
            if not v.lower <= v.upper:
                raise ValueError(f"variable {v.name}: lower bound exceeds upper bound")
            if v.kind == BINARY and (v.lower < 0 or v.upper > 1):
                raise ValueError(f"binary variable {v.name} has bounds outside [0, 1]")
        for con in self.constraints:
            if con.relation not in RELATIONS:
                raise ValueError(f"constraint {con.name}: unknown relation {con.relation!r}")
            if len(con.indices) != len(con.coefs):
                raise ValueError(f"constraint {con.name}: index/coefficient length mismatch")
            if len(set(con.indices)) != len(con.indices):
                raise ValueError(f"constraint {con.name}: repeated column index")
            for j in con.indices:
                if not 0 <= j < n:
                    raise ValueError(f"constraint {con.name}: column index {j} out of range")

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def nonzeros(self) -> int:
        return sum(len(c.indices) for c in self.constraints)

    @property
    def is_maximize(self) -> bool:
        return self.sense == MAXIMIZE

    # dense views used by the solvers

    @cached_property
    def matrix(self) -> np.ndarray:
        A = np.zeros((self.num_constraints, self.num_vars))
        for i, con in enumerate(self.constraints):
            A[i, list(con.indices)] = con.coefs
        A.setflags(write=False)
        return A

    @cached_property
    def c(self) -> np.ndarray:
        out = np.array(self.objective, dtype=float)
        out.setflags(write=False)
        return out

    @cached_property
    def rhs(self) -> np.ndarray:
        out = np.array([con.rhs for con in self.constraints], dtype=float)
        out.setflags(write=False)
        return out

    @cached_property
    def relations(self) -> tuple[str, ...]:
        return tuple(con.relation for con in self.constraints)

    @cached_property
    def lower(self) -> np.ndarray:
        out = np.array([v.lower for v in self.variables], dtype=float)
        out.setflags(write=False)
        return out

    @cached_property
    def upper(self) -> np.ndarray:
        out = np.array([v.upper for v in self.variables], dtype=float)
        out.setflags(write=False)
        return out

    @cached_property
    def integral_mask(self) -> np.ndarray:
        out = np.array([v.is_integral for v in self.variables], dtype=bool)
        out.setflags(write=False)
        return out

    @cached_property
    def column_rows(self) -> tuple[tuple[int, ...], ...]:
        """For every variable, the constraint indices it appears in."""
        cols: list[list[int]] = [[] for _ in range(self.num_vars)]
        for i, con in enumerate(self.constraints):
            for j in con.indices:
                cols[j].append(i)
        return tuple(tuple(c) for c in cols)

    def objective_value(self, x) -> float:
        return float(np.dot(self.c, x)) + self.objective_constant

    def is_feasible(self, x, tol: float = 1e-6) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        mask = self.integral_mask
        if np.any(np.abs(x[mask] - np.round(x[mask])) > tol):
            return False
        act = self.matrix @ x if self.num_constraints else np.zeros(0)
        for a, rel, b in zip(act, self.relations, self.rhs):
            scale = tol * (1.0 + abs(b))
            if rel == LE and a > b + scale:
                return False
            if rel == GE and a < b - scale:
                return False
            if rel == EQ and abs(a - b) > scale:
                return False
        return True


def make_instance(name, sense, objective, rows, variables=None, objective_constant=0.0):
    """Build an instance from dense-ish python data.

    ``rows`` is a list of ``(coef_dict_or_list, relation, rhs)``; a list is
    read as a dense row. ``variables`` is a list of ``(kind, lower, upper)``
    tuples and defaults to continuous ``[0, inf)``.
    """
    n = len(objective)
    if variables is None:
        variables = [(CONTINUOUS, 0.0, INF)] * n
    vars_ = tuple(
        Variable(f"x{j}", kind, float(lo), float(hi)) for j, (kind, lo, hi) in enumerate(variables)
    )
    cons = []
    for i, (coefs, rel, rhs) in enumerate(rows):
        if isinstance(coefs, dict):
            items = sorted((int(j), float(v)) for j, v in coefs.items() if v != 0)
        else:
            items = [(j, float(v)) for j, v in enumerate(coefs) if v != 0]
        cons.append(
            Constraint(
                f"c{i}",
                tuple(j for j, _ in items),
                tuple(v for _, v in items),
                rel,
                float(rhs),
            )
        )
    return MipInstance(
        name=name,
        sense=sense,
        objective=tuple(float(v) for v in objective),
        constraints=tuple(cons),
        variables=vars_,
        objective_constant=float(objective_constant),
    )


def lp_relaxation(instance: MipInstance) -> MipInstance:
    """Same instance with every integrality requirement dropped."""
    if not any(v.is_integral for v in instance.variables):
        return instance
    relaxed = tuple(replace(v, kind=CONTINUOUS) for v in instance.variables)
    return replace(instance, variables=relaxed)


def instances_equal(a: MipInstance, b: MipInstance, tol: float = 0.0) -> bool:
    """Compare two instances ignoring row and column order (matched by name)."""
    if (a.sense, a.num_vars, a.num_constraints) != (b.sense, b.num_vars, b.num_constraints):
        return False
    if abs(a.objective_constant - b.objective_constant) > tol:
        return False

    def close(u, v):
        if u == v:
            return True
        return abs(u - v) <= tol

    bvars = {v.name: (j, v) for j, v in enumerate(b.variables)}
    if len(bvars) != b.num_vars:
        return False
    colmap = {}
    for j, v in enumerate(a.variables):
        if v.name not in bvars:
            return False
        k, w = bvars[v.name]
        if v.kind != w.kind or not close(v.lower, w.lower) or not close(v.upper, w.upper):
            return False
        if not close(a.objective[j], b.objective[k]):
            return False
        colmap[j] = k
    bcons = {c.name: c for c in b.constraints}
    if len(bcons) != b.num_constraints:
        return False
    for con in a.constraints:
        other = bcons.get(con.name)
        if other is None or other.relation != con.relation or not close(other.rhs, con.rhs):
            return False
        mine = {colmap[j]: v for j, v in zip(con.indices, con.coefs)}
        theirs = dict(zip(other.indices, other.coefs))
        if mine.keys() != theirs.keys():
            return False
        if not all(close(mine[k], theirs[k]) for k in mine):
            return False
    return True


@dataclass(frozen=True)
class InstanceFeatureVector:
    num_vars: int
    num_constraints: int
    num_nonzeros: int
    prop_binary: float
    prop_integer: float
    prop_continuous: float
    matrix_density: float
    mean_row_nonzeros: float
    std_row_nonzeros: float
    mean_abs_rhs: float
    std_abs_rhs: float
    mean_abs_objective: float
    std_abs_objective: float
    prop_equality_constraints: float = field(default=0.0)

    @classmethod
    def field_names(cls) -> list[str]:
        return list(cls.__dataclass_fields__)

    def as_array(self) -> np.ndarray:
        return np.array([float(getattr(self, f)) for f in self.field_names()])


def extract_instance_features(instance: MipInstance) -> InstanceFeatureVector:
    n, m = instance.num_vars, instance.num_constraints
    if m == 0 or n == 0:
        raise ValueError("instance features need at least one constraint and one variable")
    kinds = [v.kind for v in instance.variables]
    row_nz = np.array([len(c) for c in instance.constraints], dtype=float)
    abs_rhs = np.abs(instance.rhs)
    abs_obj = np.abs(instance.c)
    return InstanceFeatureVector(
        num_vars=n,
        num_constraints=m,
        num_nonzeros=instance.nonzeros,
        prop_binary=kinds.count(BINARY) / n,
        prop_integer=kinds.count(INTEGER) / n,
        prop_continuous=kinds.count(CONTINUOUS) / n,
        matrix_density=instance.nonzeros / (n * m),
        mean_row_nonzeros=float(row_nz.mean()),
        std_row_nonzeros=float(row_nz.std()),
        mean_abs_rhs=float(abs_rhs.mean()),
        std_abs_rhs=float(abs_rhs.std()),
        mean_abs_objective=float(abs_obj.mean()),
        std_abs_objective=float(abs_obj.std()),
        prop_equality_constraints=instance.relations.count(EQ) / m,
    )
