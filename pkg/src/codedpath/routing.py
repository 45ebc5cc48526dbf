"""Shortest-path routing of primaries and span-disjointness matrices."""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .demand import DemandSet
from .topology import NetworkGraph


class RoutingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RoutedPath:
    connection: int
    nodes: tuple[int, ...]
    spans: tuple[int, ...]
    length_km: float

    @property
    def hop_count(self) -> int:
        return len(self.spans)

    @property
    def span_set(self) -> frozenset[int]:
        return frozenset(self.spans)

    @property
    def source(self) -> int:
        return self.nodes[0]

    @property
    def destination(self) -> int:
        return self.nodes[-1]


def path_from_nodes(graph: NetworkGraph, nodes, connection: int = -1) -> RoutedPath:
    nodes = tuple(nodes)
    spans = []
    for a, b in zip(nodes, nodes[1:]):
        sid = graph.span_between(a, b)
        if sid is None:
            raise RoutingError(f"nodes {a} and {b} are not adjacent")
        spans.append(sid)
    if len(set(spans)) != len(spans) or len(set(nodes)) != len(nodes):
        raise RoutingError(f"path {nodes} is not simple")
    length = sum(graph.span(s).cost_km for s in spans)
    return RoutedPath(connection, nodes, tuple(spans), length)


def shortest_path(graph: NetworkGraph, s: int, d: int, connection: int = -1) -> RoutedPath:
    """Minimum-length path; ties go to the lexicographically smallest node sequence."""
    if s == d:
        raise RoutingError("source equals destination")
    # (length, node sequence) labels; lexicographic order of the tuple breaks ties
    heap = [(0.0, (s,))]
    done: set[int] = set()
    while heap:
        dist, seq = heapq.heappop(heap)
        v = seq[-1]
        if v in done:
            continue
        done.add(v)
        if v == d:
            return path_from_nodes(graph, seq, connection)
        for w, sid in graph.neighbors(v):
            if w not in done:
                heapq.heappush(heap, (dist + graph.span(sid).cost_km, seq + (w,)))
    raise RoutingError(f"node {d} unreachable from {s}")


def route_primaries(graph: NetworkGraph, demands: DemandSet) -> list[RoutedPath]:
    return [shortest_path(graph, dm.source, dm.destination, dm.index) for dm in demands]


def pairwise_disjointness(paths) -> np.ndarray:
    """``m[i, j] = 1`` iff paths i and j share no span; the diagonal is 0."""
    n = len(paths)
    sets = [p.span_set if isinstance(p, RoutedPath) else frozenset(p) for p in paths]
    m = np.zeros((n, n), dtype=np.int8)
    for i in range(n):
        for j in range(i + 1, n):
            if sets[i].isdisjoint(sets[j]):
                m[i, j] = m[j, i] = 1
    return m


def simple_paths(graph: NetworkGraph, s: int, d: int, banned_spans=frozenset(), max_length=float("inf")):
    """Yield every simple s-d path (as node tuples) avoiding ``banned_spans``
    whose length does not exceed ``max_length``."""
    stack = [(s, (s,), 0.0)]
    while stack:
        v, seq, dist = stack.pop()
        if v == d:
            yield seq
            continue
        for w, sid in reversed(graph.neighbors(v)):
            if sid in banned_spans or w in seq:
                continue
            nd = dist + graph.span(sid).cost_km
            if nd <= max_length:
                stack.append((w, seq + (w,), nd))
