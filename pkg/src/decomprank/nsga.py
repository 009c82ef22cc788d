"""NSGA-II over constraint-relaxation genomes.

Both objectives are minimised: the number of relaxed constraints and the
variable count of the largest remaining subproblem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decomp import components, deduplicate, partition, remove_redundant_constraints
from .model import MipInstance
from .sampling import greedy_mask, make_rng

DEFAULT_SEEDING = tuple(round(0.05 * k, 2) for k in range(1, 20)) + (0.99,)


@dataclass(frozen=True)
class NsgaConfig:
    population_size: int = 32
    generations: int = 300
    crossover_prob: float = 0.95
    mutation_prob_per_gene: float = 0.01
    seed: int = 0
    seeding_proportions: tuple = DEFAULT_SEEDING

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population_size must be even and at least 4")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        for p in (self.crossover_prob, self.mutation_prob_per_gene):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must lie in [0, 1]")
        if not self.seeding_proportions or not all(0 < q < 1 for q in self.seeding_proportions):
            raise ValueError("seeding proportions must lie in (0, 1)")


@dataclass
class Individual:
    genome: np.ndarray
    objectives: tuple
    rank: int = 0
    crowding: float = 0.0
    extra: dict = field(default_factory=dict)


def dominates(a, b) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def fast_nondominated_sort(points) -> list[list[int]]:
    """Indices of ``points`` grouped into fronts, best front first."""
    n = len(points)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    fronts = [[]]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(points[p], points[q]):
                dominated_by[p].append(q)
            elif dominates(points[q], points[p]):
                counts[p] += 1
        if counts[p] == 0:
            fronts[0].append(p)
    i = 0
    while fronts[i]:
        nxt = []
        for p in fronts[i]:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(q)
        i += 1
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(front) -> list[float]:
    n = len(front)
    if n == 0:
        raise ValueError("crowding distance of an empty front")
    pts = np.asarray(front, dtype=float).reshape(n, -1)
    dist = np.zeros(n)
    for k in range(pts.shape[1]):
        order = np.argsort(pts[:, k], kind="stable")
        dist[order[0]] = dist[order[-1]] = np.inf
        span = pts[order[-1], k] - pts[order[0], k]
        if span == 0 or n < 3:
            continue
        for a in range(1, n - 1):
            dist[order[a]] += (pts[order[a + 1], k] - pts[order[a - 1], k]) / span
    return dist.tolist()


class _Evaluator:
    def __init__(self, instance: MipInstance):
        self.instance = instance
        self.cache: dict[bytes, tuple] = {}

    def __call__(self, genome: np.ndarray) -> tuple:
        key = np.packbits(genome).tobytes()
        if key not in self.cache:
            comps = components(self.instance, genome)
            self.cache[key] = (int(genome.sum()), max((len(c) for c in comps), default=0))
        return self.cache[key]


def _assign(pop: list[Individual]) -> list[list[int]]:
    fronts = fast_nondominated_sort([ind.objectives for ind in pop])
    for r, front in enumerate(fronts):
        cd = crowding_distance([pop[i].objectives for i in front])
        for i, d in zip(front, cd):
            pop[i].rank = r
            pop[i].crowding = d
    return fronts


def _tournament(pop, rng) -> Individual:
    a, b = rng.integers(len(pop), size=2)
    pa, pb = pop[a], pop[b]
    if (pb.rank, -pb.crowding) < (pa.rank, -pa.crowding):
        return pb
    return pa


def _survive(pop: list[Individual], size: int) -> list[Individual]:
    fronts = _assign(pop)
    chosen: list[int] = []
    for front in fronts:
        if len(chosen) + len(front) <= size:
            chosen.extend(front)
            continue
        rest = sorted(front, key=lambda i: (-pop[i].crowding, i))
        chosen.extend(rest[: size - len(chosen)])
        break
    return [pop[i] for i in chosen]


def evolve(instance: MipInstance, cfg: NsgaConfig = NsgaConfig(), history=None):
    """Run NSGA-II and return the final Pareto front as decompositions.

    ``history(generation, points)``, when given, receives the objective
    vectors of front 0 after seeding and after every generation.
    Front members are post-processed with the redundancy rules and
    deduplicated by canonical key.
    """
    m = instance.num_constraints
    if m == 0:
        return [partition(instance, [], source="nsga2")]
    rng = make_rng(cfg.seed, instance.name, "nsga2")
    evaluate = _Evaluator(instance)
    pop = []
    for k in range(cfg.population_size):
        q = cfg.seeding_proportions[k % len(cfg.seeding_proportions)]
        g = greedy_mask(instance, max(q, 1.0 / m), rng)
        pop.append(Individual(g, evaluate(g)))
    fronts = _assign(pop)
    if history is not None:
        history(0, [pop[i].objectives for i in fronts[0]])
    for gen in range(1, cfg.generations + 1):
        offspring = []
        while len(offspring) < cfg.population_size:
            p1 = _tournament(pop, rng).genome
            p2 = _tournament(pop, rng).genome
            if rng.random() < cfg.crossover_prob:
                swap = rng.random(m) < 0.5
                c1 = np.where(swap, p2, p1)
                c2 = np.where(swap, p1, p2)
            else:
                c1, c2 = p1.copy(), p2.copy()
            for child in (c1, c2):
                flip = rng.random(m) < cfg.mutation_prob_per_gene
                child = child ^ flip
                offspring.append(Individual(child, evaluate(child)))
        pop = _survive(pop + offspring, cfg.population_size)
        if history is not None:
            history(gen, [ind.objectives for ind in pop if ind.rank == 0])
    _assign(pop)
    front = [ind for ind in pop if ind.rank == 0]
    decomps = [
        remove_redundant_constraints(instance, partition(instance, np.flatnonzero(ind.genome).tolist(), "nsga2"))
        for ind in front
    ]
    decomps.sort(key=lambda d: (len(d.relaxed), d.relaxed))
    return deduplicate(decomps)
