"""Bidirectional connection demands and their random partitioning."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .topology import NetworkGraph


@dataclass(frozen=True)
class Demand:
    index: int
    source: int
    destination: int

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError(f"demand {self.index}: source equals destination")


DemandSet = tuple[Demand, ...]


@dataclass(frozen=True)
class DemandPartition:
    groups: tuple[DemandSet, ...]
    max_group_size: int
    seed: int


def make_demands(pairs) -> DemandSet:
    return tuple(Demand(i, int(s), int(d)) for i, (s, d) in enumerate(pairs))


def generate_uniform(graph: NetworkGraph) -> DemandSet:
    """One demand per unordered node pair."""
    return make_demands(combinations(range(graph.n_nodes), 2))


def generate_gravity(graph: NetworkGraph, count: int, seed: int) -> DemandSet:
    """Sample ``count`` demands with pair weight ``pop(u) * pop(v)``.

    Sampling is with replacement; a repeated pair is a distinct connection.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    pairs = list(combinations(range(graph.n_nodes), 2))
    weights = np.array([graph.population(u) * graph.population(v) for u, v in pairs])
    if weights.sum() <= 0:
        raise ValueError("populations give zero total weight")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(pairs), size=count, p=weights / weights.sum())
    return make_demands(pairs[k] for k in picks)


def partition(demands: DemandSet, max_group_size: int = 20, seed: int = 1) -> DemandPartition:
    """Seeded shuffle, then chunk into groups of at most ``max_group_size``."""
    if max_group_size < 1:
        raise ValueError("max_group_size must be >= 1")
    order = np.random.default_rng(seed).permutation(len(demands))
    shuffled = [demands[k] for k in order]
    groups = tuple(
        tuple(sorted(shuffled[k:k + max_group_size], key=lambda d: d.index))
        for k in range(0, len(shuffled), max_group_size)
    )
    return DemandPartition(groups, max_group_size, seed)


def parse_demands(text: str) -> DemandSet:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "demand" or len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 'demand <index> <source> <destination>'")
        out.append(Demand(int(parts[1]), int(parts[2]), int(parts[3])))
    out.sort(key=lambda d: d.index)
    if [d.index for d in out] != list(range(len(out))):
        raise ValueError("demand indices must be unique and contiguous from 0")
    return tuple(out)


def load_demands(path: str | Path) -> DemandSet:
    return parse_demands(Path(path).read_text(encoding="utf-8"))


def dump_demands(demands: DemandSet) -> str:
    return "".join(f"demand {d.index} {d.source} {d.destination}\n" for d in demands)
