"""Greedy-random decomposition sampler.

Dense constraints are more likely to be relaxed: constraint ``i`` is picked
with probability ``|V_i| / S_V * Q * |C|`` (clamped to [0, 1]) on every
pass over the rows, until the target count is reached.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .decomp import Decomposition, partition
from .model import MipInstance


@dataclass(frozen=True)
class GreedyConfig:
    target_proportion: float = 0.1
    seed: int = 0
    count: int = 1

    def __post_init__(self):
        if not 0 < self.target_proportion < 1:
            raise ValueError("target_proportion must lie in (0, 1)")
        if self.count < 0:
            raise ValueError("count must be non-negative")


def make_rng(seed: int, *salt) -> np.random.Generator:
    """PCG64 stream keyed by an integer seed and optional string/int salt."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for s in salt:
        words.append(zlib.crc32(str(s).encode()) if not isinstance(s, int) else int(s))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def relax_probabilities(instance: MipInstance, q: float) -> np.ndarray:
    sizes = np.array([len(c) for c in instance.constraints], dtype=float)
    total = sizes.sum()
    if total == 0:
        return np.zeros_like(sizes)
    return np.clip(sizes / total * q * instance.num_constraints, 0.0, 1.0)


def target_count(instance: MipInstance, q: float) -> int:
    """``ceil(Q |C|)``, capped at the number of rows that can be drawn."""
    m = instance.num_constraints
    if q * m < 1:
        raise ValueError(f"proportion {q} of {m} constraints relaxes nothing")
    want = math.ceil(q * m - 1e-9)
    return min(want, sum(1 for c in instance.constraints if c.indices))


def greedy_mask(instance: MipInstance, q: float, rng: np.random.Generator) -> np.ndarray:
    """One greedy draw as a boolean mask over the constraints."""
    probs = relax_probabilities(instance, q)
    target = target_count(instance, q)
    order = sorted(range(instance.num_constraints), key=lambda i: (-len(instance.constraints[i]), i))
    order = [i for i in order if probs[i] > 0]
    mask = np.zeros(instance.num_constraints, dtype=bool)
    count = 0
    while count < target:
        for i in order:
            if not mask[i] and rng.random() < probs[i]:
                mask[i] = True
                count += 1
                if count == target:
                    break
    return mask


def greedy_sample(instance: MipInstance, cfg: GreedyConfig) -> list[Decomposition]:
    rng = make_rng(cfg.seed, instance.name, "greedy", repr(cfg.target_proportion))
    out = []
    for _ in range(cfg.count):
        mask = greedy_mask(instance, cfg.target_proportion, rng)
        out.append(partition(instance, np.flatnonzero(mask).tolist(), source="greedy"))
    return out
