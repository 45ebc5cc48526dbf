"""Conversion of a fixed SPP routing into coded path protection groups.

The conversion ILP reuses the SPP variables with protection routes fixed and
replaces the sharing rule by the coding rule: two connections may sit in the
same coding group only if their primaries are span-disjoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import milp
from .coloring import is_colorable, max_clique, min_colors
from .routing import RoutedPath
from .spp import InfeasibleError, SppInstance, SppSolution, aname, kname, nname, _add_common
from .topology import NetworkGraph


@dataclass
class CppInstance:
    graph: NetworkGraph
    demands: tuple
    primaries: list[RoutedPath]
    routes: list[RoutedPath]
    m: np.ndarray
    C: int | None = None

    def __post_init__(self):
        if self.C is not None and self.C < 1:
            raise ValueError("C must be >= 1")
        for i, (p, r) in enumerate(zip(self.primaries, self.routes)):
            if p.span_set & r.span_set:
                raise ValueError(f"protection of connection {i} overlaps its primary")

    @classmethod
    def from_spp(cls, instance: SppInstance, routes, C: int | None = None) -> "CppInstance":
        return cls(instance.graph, tuple(instance.demands), list(instance.primaries), list(routes), instance.m, C)

    @property
    def size(self) -> int:
        return len(self.demands)

    def conflict(self) -> np.ndarray:
        conflict = (self.m == 0).astype(np.int8)
        np.fill_diagonal(conflict, 0)
        return conflict


@dataclass(frozen=True)
class EndNode:
    connection: int
    role: str  # "S" or "T"
    node: int
    position: int = -1


@dataclass(frozen=True)
class Trail:
    """A connected piece of a coding group's protection structure.

    For ``kind == "linear"`` the nodes/spans run along the path and the end
    nodes are ordered along it. Other kinds keep sorted node and span sets.
    """
    group: int
    kind: str
    nodes: tuple[int, ...]
    spans: tuple[int, ...]
    end_nodes: tuple[EndNode, ...]
    primaries: tuple[tuple[int, tuple[int, ...]], ...]
    protections: tuple[tuple[int, tuple[int, ...]], ...]

    @property
    def connections(self) -> tuple[int, ...]:
        return tuple(c for c, _ in self.protections)

    def primary(self, connection: int) -> tuple[int, ...]:
        return dict(self.primaries)[connection]

    def protection(self, connection: int) -> tuple[int, ...]:
        return dict(self.protections)[connection]


@dataclass
class CodingGroup:
    index: int
    members: tuple[int, ...]
    trees: list[frozenset[int]]
    trails: list[Trail] = field(default_factory=list)


@dataclass
class CppSolution:
    group_of: list[int]
    reserved: dict[int, frozenset[int]]
    spare_cost: float
    C: int
    status: str = "optimal"
    nodes_explored: int = 0
    gap: float = 0.0


def build_cpp_ilp(instance: CppInstance, C: int | None = None) -> milp.IlpModel:
    """Group-assignment model: one group per connection, reservation, k-checks
    and the primary-disjointness rule. Protection routes are constants."""
    C = C or instance.C
    if C is None:
        raise ValueError("group bound C required")
    g, N = instance.graph, instance.size
    model = milp.IlpModel(name="cpp")
    for i in range(N):
        for t in range(C):
            model.add_var(nname(i, t))
    for e in range(g.n_spans):
        for t in range(C):
            model.add_var(aname(e, t))
    for i in range(N):
        for j in range(i + 1, N):
            model.add_var(kname(i, j))
    routes = [r.span_set for r in instance.routes]
    m = instance.m
    _add_common(model, instance, C, lambda i, e: int(e in routes[i]), lambda i, j: ({}, 1 + int(m[i, j])),
                max_clique(instance.conflict()))
    return model


def convert(spp: SppSolution | None, instance: CppInstance, C: int | None = None,
            method: str = "bnb", time_budget: float = 60.0, offset: int = 0) -> tuple[CppSolution, list[CodingGroup]]:
    """Optimal coding-group assignment for fixed protection routes.

    ``C`` defaults to the instance bound, then to the SPP wavelength count.
    Raises InfeasibleError carrying the smallest feasible C.
    """
    C = C or instance.C or (spp.T if spp is not None else None)
    conflict = instance.conflict()
    cmin = min_colors(conflict)
    if C is None:
        C = cmin
    if not is_colorable(conflict, C):
        raise InfeasibleError(f"C={C} is infeasible; smallest feasible C is {cmin}", minimum=cmin)
    model = build_cpp_ilp(instance, C)
    sol = milp.solve(model, time_budget, method)
    if not sol.assignment:
        raise RuntimeError(f"no coding assignment found ({sol.status})")
    g, N = instance.graph, instance.size
    group_of = [next(t for t in range(C) if sol.assignment[nname(i, t)]) for i in range(N)]
    reserved = {t: frozenset().union(*[r.span_set for r, w in zip(instance.routes, group_of) if w == t])
                for t in range(C)}
    spare = sum(g.span(e).cost_km for spans in reserved.values() for e in spans)
    if sol.status == "optimal" and not math.isclose(spare, sol.objective_value, rel_tol=1e-9, abs_tol=1e-6):
        raise RuntimeError("reservation map disagrees with the ILP objective")
    result = CppSolution(group_of, reserved, spare, C, sol.status, sol.nodes_explored, sol.gap)
    return result, coding_groups(instance, group_of, offset)


def coding_groups(instance: CppInstance, group_of, offset: int = 0) -> list[CodingGroup]:
    """Build CodingGroup records (with trails) from a group assignment.

    ``offset`` shifts group indices so groups from several partitions stay unique.
    """
    groups = []
    for t in sorted(set(group_of)):
        members = tuple(i for i, w in enumerate(group_of) if w == t)
        comps = _components(instance.graph, [instance.routes[i].span_set for i in members])
        group = CodingGroup(t + offset, tuple(instance.demands[i].index for i in members), comps)
        group.trails = extract_trails(group, instance, members)
        groups.append(group)
    return groups


def _components(graph: NetworkGraph, span_sets) -> list[frozenset[int]]:
    spans = sorted(set().union(*span_sets)) if span_sets else []
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in spans:
        sp = graph.span(e)
        parent[find(sp.u)] = find(sp.v)
    comps: dict[int, set[int]] = {}
    for e in spans:
        comps.setdefault(find(graph.span(e).u), set()).add(e)
    return sorted((frozenset(c) for c in comps.values()), key=lambda c: min(c))


def _linear_order(graph: NetworkGraph, spans: frozenset[int]):
    adj: dict[int, list[tuple[int, int]]] = {}
    for e in spans:
        sp = graph.span(e)
        adj.setdefault(sp.u, []).append((sp.v, e))
        adj.setdefault(sp.v, []).append((sp.u, e))
    start = min(v for v, nb in adj.items() if len(nb) == 1)
    nodes, order = [start], []
    prev = None
    while True:
        nxt = [(w, e) for w, e in adj[nodes[-1]] if e != prev]
        if not nxt:
            break
        w, e = nxt[0]
        nodes.append(w)
        order.append(e)
        prev = e
    return tuple(nodes), tuple(order)


def classify(graph: NetworkGraph, spans: frozenset[int]) -> str:
    degree: dict[int, int] = {}
    for e in spans:
        sp = graph.span(e)
        degree[sp.u] = degree.get(sp.u, 0) + 1
        degree[sp.v] = degree.get(sp.v, 0) + 1
    if len(spans) >= len(degree):
        return "cyclic"
    return "linear" if max(degree.values()) <= 2 else "branching"


def extract_trails(group: CodingGroup, instance: CppInstance, members=None) -> list[Trail]:
    """One Trail per tree of the group, tagged linear, branching or cyclic."""
    if members is None:
        index = {dm.index: i for i, dm in enumerate(instance.demands)}
        members = [index[c] for c in group.members]
    g = instance.graph
    trails = []
    for tree in group.trees:
        inside = [i for i in members if instance.routes[i].span_set <= tree]
        kind = classify(g, tree)
        if kind == "linear":
            nodes, spans = _linear_order(g, tree)
        else:
            spans = tuple(sorted(tree))
            nodes = tuple(sorted({v for e in tree for v in g.span(e).endpoints}))
        pos = {v: k for k, v in enumerate(nodes)}
        ends = []
        for i in inside:
            dm = instance.demands[i]
            ends.append(EndNode(dm.index, "S", dm.source, pos[dm.source]))
            ends.append(EndNode(dm.index, "T", dm.destination, pos[dm.destination]))
        ends.sort(key=lambda en: (en.position, en.connection, en.role))
        trails.append(Trail(
            group.index, kind, nodes, spans, tuple(ends),
            tuple((instance.demands[i].index, instance.primaries[i].spans) for i in inside),
            tuple((instance.demands[i].index, instance.routes[i].spans) for i in inside),
        ))
    return trails


def validate_groups(instance: CppInstance, groups: list[CodingGroup]) -> list[str]:
    """Recompute the coding-group invariants from raw paths; return violations."""
    errors = []
    index = {dm.index: i for i, dm in enumerate(instance.demands)}
    seen = set()
    for grp in groups:
        locs = [index[c] for c in grp.members]
        seen.update(locs)
        for a in range(len(locs)):
            for b in range(a + 1, len(locs)):
                pa, pb = instance.primaries[locs[a]], instance.primaries[locs[b]]
                if pa.span_set & pb.span_set:
                    errors.append(f"group {grp.index}: primaries of {grp.members[a]} and {grp.members[b]} overlap")
        for a in range(len(grp.trees)):
            for b in range(a + 1, len(grp.trees)):
                if grp.trees[a] & grp.trees[b]:
                    errors.append(f"group {grp.index}: trees {a} and {b} share spans")
        for i in locs:
            r = instance.routes[i]
            if r.span_set & instance.primaries[i].span_set:
                errors.append(f"connection {instance.demands[i].index}: protection overlaps own primary")
            holders = [k for k, tree in enumerate(grp.trees) if r.span_set <= tree]
            if len(holders) != 1:
                errors.append(f"connection {instance.demands[i].index}: protection not inside exactly one tree")
    if seen != set(range(instance.size)):
        errors.append("groups do not cover every connection exactly")
    return errors


def format_groups(groups: list[CodingGroup]) -> str:
    """One ``group <t>: connections [...] trees <k>`` line per group."""
    return "".join(f"group {g.index}: connections {list(g.members)} trees {len(g.trees)}\n" for g in groups)


__all__ = [
    "CppInstance", "CppSolution", "CodingGroup", "EndNode", "Trail",
    "build_cpp_ilp", "convert", "coding_groups", "extract_trails", "validate_groups",
    "classify", "format_groups",
]
