"""Constraint-relaxation decompositions.

The constraint matrix is viewed as a hypergraph: variables are nodes and
every constraint is a hyperedge over its nonzero columns. Relaxing a set of
constraints deletes their hyperedges; the connected components of what is
left are the independent subproblems.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .model import MipInstance

SOURCES = ("greedy", "nsga2", "none-relaxed", "manual")


@dataclass(frozen=True)
class Subproblem:
    variables: tuple[int, ...]
    constraints: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.variables)


@dataclass(frozen=True)
class Decomposition:
    instance_id: str
    relaxed: tuple[int, ...]
    subproblems: tuple[Subproblem, ...]
    source: str = "manual"

    @property
    def key(self) -> str:
        return canonical_key(self)

    def block_of(self) -> dict[int, int]:
        return {v: k for k, sp in enumerate(self.subproblems) for v in sp.variables}


def _validate_relaxed(instance: MipInstance, relaxed: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted(set(int(i) for i in relaxed)))
    m = instance.num_constraints
    for i in out:
        if not 0 <= i < m:
            raise IndexError(f"constraint index {i} out of range for {m} constraints")
    return out


def components(instance: MipInstance, relaxed_mask) -> list[list[int]]:
    """Connected variable sets with the masked constraints removed (BFS, O(nz))."""
    n = instance.num_vars
    cols = instance.column_rows
    cons = instance.constraints
    seen = [False] * n
    edge_done = [False] * instance.num_constraints
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for i in cols[v]:
                if relaxed_mask[i] or edge_done[i]:
                    continue
                edge_done[i] = True
                for u in cons[i].indices:
                    if not seen[u]:
                        seen[u] = True
                        comp.append(u)
                        queue.append(u)
        comps.append(comp)
    return comps


def largest_component_size(instance: MipInstance, relaxed_mask) -> int:
    return max((len(c) for c in components(instance, relaxed_mask)), default=0)


def partition(instance: MipInstance, relaxed: Iterable[int], source: str = "manual") -> Decomposition:
    """Split the instance into independent subproblems once ``relaxed`` is removed.

    Subproblems are ordered by their smallest variable index. Variables that
    touch no remaining constraint become single-variable subproblems. Empty
    rows that are not relaxed are attached to the first subproblem.
    """
    relaxed = _validate_relaxed(instance, relaxed)
    mask = [False] * instance.num_constraints
    for i in relaxed:
        mask[i] = True
    comps = components(instance, mask)
    block = [0] * instance.num_vars
    for k, comp in enumerate(comps):
        for v in comp:
            block[v] = k
    block_cons: list[list[int]] = [[] for _ in comps]
    for i, con in enumerate(instance.constraints):
        if mask[i]:
            continue
        if con.indices:
            block_cons[block[con.indices[0]]].append(i)
        elif comps:
            block_cons[0].append(i)
    subs = tuple(Subproblem(tuple(sorted(comp)), tuple(cs)) for comp, cs in zip(comps, block_cons))
    return Decomposition(instance.name, relaxed, subs, source)


def redundant_reason(instance: MipInstance, decomp: Decomposition, i: int, block=None) -> str | None:
    """Return ``"subset"`` or ``"singletons"`` if relaxed row ``i`` is redundant."""
    if block is None:
        block = decomp.block_of()
    sizes = [sp.size for sp in decomp.subproblems]
    cols = instance.constraints[i].indices
    blocks = {block[j] for j in cols}
    if len(blocks) <= 1:
        return "subset"
    if all(sizes[b] == 1 for b in blocks):
        return "singletons"
    return None


def remove_redundant_constraints(instance: MipInstance, decomp: Decomposition) -> Decomposition:
    """Move redundant relaxed rows back into the subproblems, to a fixpoint.

    A relaxed row is redundant when its columns all sit inside one
    subproblem, or when every one of its columns is a single-variable
    subproblem. Rows are visited in ascending order and the block map is
    updated after every reinstatement, so a merge made by the second rule is
    visible to the rows that follow.
    """
    block = decomp.block_of()
    sizes = {k: sp.size for k, sp in enumerate(decomp.subproblems)}
    next_id = len(decomp.subproblems)
    relaxed = list(decomp.relaxed)
    changed = True
    while changed:
        changed = False
        keep = []
        for i in relaxed:
            cols = instance.constraints[i].indices
            blocks = {block[j] for j in cols}
            if len(blocks) <= 1:
                changed = True
                continue
            if all(sizes[b] == 1 for b in blocks):
                for j in cols:
                    block[j] = next_id
                for b in blocks:
                    del sizes[b]
                sizes[next_id] = len(cols)
                next_id += 1
                changed = True
                continue
            keep.append(i)
        relaxed = keep
    return partition(instance, relaxed, decomp.source)


def canonical_key(decomp: Decomposition) -> str:
    return decomp.instance_id + ":" + ",".join(str(i) for i in sorted(decomp.relaxed))


def deduplicate(decomps: Iterable[Decomposition]) -> list[Decomposition]:
    """Keep the first decomposition seen for every canonical key."""
    seen = set()
    out = []
    for d in decomps:
        k = canonical_key(d)
        if k not in seen:
            seen.add(k)
            out.append(d)
    return out


@dataclass(frozen=True)
class DecompositionStats:
    m_l: int
    n_l: int
    m: int
    n: int
    K: int
    block_nonzeros: tuple[int, ...]
    block_nonzero_total: int
    block_densities: tuple[float, ...]
    border_nz: int
    border_vars: int
    s: int
    t: int
    largest_subproblem_vars: int
    single_var_subproblems: int
    block_vars: tuple[int, ...] = field(default=())
    block_cons: tuple[int, ...] = field(default=())


def compute_stats(instance: MipInstance, decomp: Decomposition) -> DecompositionStats:
    """Counts and areas behind the heuristic scores and the learned features.

    ``block_densities`` only covers blocks that own at least one nonempty
    row; a constraint-free block has no coefficient matrix to measure.
    ``single_var_subproblems`` counts free variables, i.e. one-variable
    blocks without rows of their own.
    """
    cons = instance.constraints
    nz, dens, bvars, bcons = [], [], [], []
    s_area = 0
    for sp in decomp.subproblems:
        rows = [i for i in sp.constraints if cons[i].indices]
        k_nz = sum(len(cons[i].indices) for i in rows)
        nz.append(k_nz)
        bvars.append(sp.size)
        bcons.append(len(rows))
        s_area += sp.size * len(rows)
        if rows:
            dens.append(k_nz / (sp.size * len(rows)))
    border_cols = set()
    border_nz = 0
    for i in decomp.relaxed:
        border_cols.update(cons[i].indices)
        border_nz += len(cons[i].indices)
    m_l = len(decomp.relaxed)
    return DecompositionStats(
        m_l=m_l,
        n_l=0,
        m=instance.num_constraints,
        n=instance.num_vars,
        K=len(decomp.subproblems),
        block_nonzeros=tuple(nz),
        block_nonzero_total=sum(nz),
        block_densities=tuple(dens),
        border_nz=border_nz,
        border_vars=len(border_cols),
        s=s_area,
        t=len(border_cols) * m_l,
        largest_subproblem_vars=max((sp.size for sp in decomp.subproblems), default=0),
        single_var_subproblems=sum(1 for v, c in zip(bvars, bcons) if v == 1 and c == 0),
        block_vars=tuple(bvars),
        block_cons=tuple(bcons),
    )


# JSON Lines persistence


def to_record(decomp: Decomposition, **extra) -> dict:
    rec = {"instance": decomp.instance_id, "relaxed": list(decomp.relaxed), "source": decomp.source}
    rec.update(extra)
    return rec


def dump_record(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"), allow_nan=True)


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dump_record(rec) + "\n")


def read_jsonl(path) -> Iterator[dict]:
    """Yield records; a truncated final line (crash mid-write) is skipped."""
    p = Path(path)
    if not p.exists():
        return
    with open(p, encoding="utf-8") as fh:
        for line in fh:
            if not line.endswith("\n"):
                break
            line = line.strip()
            if line:
                yield json.loads(line)


def from_record(instance: MipInstance, rec: dict) -> Decomposition:
    if rec["instance"] != instance.name:
        raise ValueError(f"record for {rec['instance']!r} applied to instance {instance.name!r}")
    return partition(instance, rec["relaxed"], rec.get("source", "manual"))
