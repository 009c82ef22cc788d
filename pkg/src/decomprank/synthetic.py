"""Generators for small structured test instances."""

from __future__ import annotations

import numpy as np

from .model import BINARY, GE, INTEGER, LE, MipInstance, make_instance
from .sampling import make_rng


def random_binary(name: str, n: int, m: int, density: float = 0.4, seed: int = 0, sense: str = "max") -> MipInstance:
    """Random pure-binary instance; every row is satisfiable by ``x = 0``."""
    rng = make_rng(seed, name)
    rows = []
    for _ in range(m):
        coefs = {}
        for j in range(n):
            if rng.random() < density:
                coefs[j] = int(rng.integers(1, 10))
        if not coefs:
            coefs[int(rng.integers(n))] = 1
        rhs = int(np.floor(sum(coefs.values()) * rng.uniform(0.3, 0.7)))
        rows.append((coefs, LE, rhs))
    obj = rng.integers(-3, 15, size=n).astype(float)
    return make_instance(name, sense, obj, rows, [(BINARY, 0, 1)] * n)


def planted_two_block(name: str = "planted", half: int = 8, rows_per_block: int = 5, seed: int = 0) -> MipInstance:
    """Two dense binary blocks joined by a single bridging row (the last row)."""
    rng = make_rng(seed, name)
    n = 2 * half
    rows = []
    for b in range(2):
        cols = list(range(b * half, (b + 1) * half))
        # a covering row keeps each block connected
        rows.append(({j: int(rng.integers(1, 10)) for j in cols}, LE, 3 * half))
        for _ in range(rows_per_block - 1):
            pick = sorted(rng.choice(cols, size=max(2, half // 2), replace=False).tolist())
            coefs = {j: int(rng.integers(1, 10)) for j in pick}
            rows.append((coefs, LE, int(sum(coefs.values()) * 0.6)))
    bridge = {0: 1, half: 1}
    rows.append((bridge, LE, 1))
    obj = rng.integers(1, 20, size=n).astype(float)
    return make_instance(name, "max", obj, rows, [(BINARY, 0, 1)] * n)


def block_structured(
    name: str,
    blocks: int = 6,
    block_vars: int = 16,
    rows_per_block: int = 6,
    linking_rows: int = 8,
    local_density: float = 0.5,
    link_density: float = 0.3,
    seed: int = 0,
) -> MipInstance:
    """Bordered block-diagonal binary maximisation.

    Each block has knapsack rows over its own variables; the linking rows
    are knapsacks over a random subset of all variables. Rows are
    shuffled so the structure is not visible from the row order.
    """
    rng = make_rng(seed, name)
    n = blocks * block_vars
    rows = []
    for b in range(blocks):
        cols = np.arange(b * block_vars, (b + 1) * block_vars)
        for r in range(rows_per_block):
            if r == 0:
                pick = cols
            else:
                pick = cols[rng.random(block_vars) < local_density]
                if len(pick) < 2:
                    pick = rng.choice(cols, size=2, replace=False)
            coefs = {int(j): int(rng.integers(1, 21)) for j in pick}
            rows.append((coefs, LE, int(sum(coefs.values()) * rng.uniform(0.35, 0.65))))
    for _ in range(linking_rows):
        pick = np.flatnonzero(rng.random(n) < link_density)
        if len(pick) < 2:
            pick = rng.choice(n, size=2, replace=False)
        coefs = {int(j): int(rng.integers(1, 21)) for j in pick}
        rows.append((coefs, LE, int(sum(coefs.values()) * rng.uniform(0.25, 0.5))))
    perm = rng.permutation(len(rows))
    rows = [rows[i] for i in perm]
    obj = rng.integers(1, 31, size=n).astype(float)
    return make_instance(name, "max", obj, rows, [(BINARY, 0, 1)] * n)


def transportation_blocks(name: str, blocks: int = 2, sources: int = 2, sinks: int = 3, seed: int = 0):
    """Transportation blocks with shared source capacities as linking rows.

    Returns ``(instance, linking_rows)``. Every block is a bipartite
    transportation polytope with integer data, so once the linking rows are
    relaxed each subproblem is totally unimodular.
    """
    rng = make_rng(seed, name)
    per = sources * sinks
    n = blocks * per
    rows = []
    for b in range(blocks):
        supply = rng.integers(5, 15, size=sources)
        demand = rng.integers(1, 5, size=sinks)
        for s in range(sources):
            rows.append(({b * per + s * sinks + d: 1 for d in range(sinks)}, LE, int(supply[s])))
        for d in range(sinks):
            rows.append(({b * per + s * sinks + d: 1 for s in range(sources)}, GE, int(demand[d])))
    linking = []
    for s in range(sources):
        cap = int(rng.integers(3 * sinks, 5 * sinks))
        coefs = {b * per + s * sinks + d: 1 for b in range(blocks) for d in range(sinks)}
        linking.append(len(rows))
        rows.append((coefs, LE, cap * blocks))
    cost = rng.integers(1, 20, size=n).astype(float)
    return make_instance(name, "min", cost, rows, [(INTEGER, 0, 20)] * n), linking


def corpus(count: int = 6, seed: int = 0, scale: int = 100) -> list[MipInstance]:
    """Block-structured instances of roughly ``scale`` variables each."""
    out = []
    shapes = [(6, 16), (5, 20), (8, 12), (4, 24), (7, 14), (6, 17), (5, 19), (9, 11)]
    for k in range(count):
        blocks, bv = shapes[k % len(shapes)]
        bv = max(2, round(bv * scale / 100))
        out.append(
            block_structured(
                f"blk{k:02d}",
                blocks=blocks,
                block_vars=bv,
                rows_per_block=5 + k % 3,
                linking_rows=6 + 2 * (k % 3),
                seed=seed + k,
            )
        )
    return out


__all__ = [
    "block_structured",
    "corpus",
    "planted_two_block",
    "random_binary",
    "transportation_blocks",
]
