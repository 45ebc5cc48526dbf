"""Network graphs of nodes and bidirectional spans.

A topology file is plain UTF-8 text with one record per line::

    # comment
    node <id> <name> [population]
    span <id> <u> <v> <cost_km>

Each span stands for two opposite directed links. Graphs are immutable once
loaded and can be shared freely between workers.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


class TopologyError(ValueError):
    """Raised for malformed topology documents or invalid graphs."""


@dataclass(frozen=True)
class Node:
    id: int
    name: str
    population: float = 1.0


@dataclass(frozen=True)
class Span:
    id: int
    u: int
    v: int
    cost_km: float

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.u, self.v)

    def other(self, node: int) -> int:
        if node == self.u:
            return self.v
        if node == self.v:
            return self.u
        raise ValueError(f"node {node} is not an endpoint of span {self.id}")


@dataclass(frozen=True)
class DirectedLink:
    """One direction of a span; ``direction`` 0 runs u->v, 1 runs v->u."""
    span: int
    direction: int
    tail: int
    head: int


@dataclass(frozen=True)
class NetworkGraph:
    nodes: tuple[Node, ...]
    spans: tuple[Span, ...]
    _adj: dict = field(init=False, repr=False, compare=False)
    _span_by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj: dict[int, list[tuple[int, int]]] = {n.id: [] for n in self.nodes}
        for s in self.spans:
            adj.setdefault(s.u, []).append((s.v, s.id))
            adj.setdefault(s.v, []).append((s.u, s.id))
        for v in adj:
            adj[v].sort()
        object.__setattr__(self, "_adj", adj)
        object.__setattr__(self, "_span_by_id", {s.id: s for s in self.spans})

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_spans(self) -> int:
        return len(self.spans)

    def span(self, span_id: int) -> Span:
        return self._span_by_id[span_id]

    def neighbors(self, v: int) -> list[tuple[int, int]]:
        """Sorted ``(neighbor, span_id)`` pairs of node ``v``."""
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def span_between(self, u: int, v: int) -> int | None:
        for w, sid in self._adj[u]:
            if w == v:
                return sid
        return None

    def population(self, v: int) -> float:
        return self.nodes[v].population

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        seen = {self.nodes[0].id}
        queue = deque(seen)
        while queue:
            v = queue.popleft()
            for w, _ in self._adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == len(self.nodes)

    def validate(self) -> "NetworkGraph":
        """Check every graph invariant; return self or raise TopologyError."""
        ids = [n.id for n in self.nodes]
        if ids != list(range(len(ids))):
            raise TopologyError("node ids must be unique and contiguous from 0")
        span_ids = [s.id for s in self.spans]
        if len(set(span_ids)) != len(span_ids):
            raise TopologyError("duplicate span id")
        pairs = set()
        for s in self.spans:
            if s.u not in self._adj or s.v not in self._adj or s.u >= len(ids) or s.v >= len(ids):
                raise TopologyError(f"span {s.id} references an unknown node")
            if s.u == s.v:
                raise TopologyError(f"span {s.id} is a self-loop")
            key = (min(s.u, s.v), max(s.u, s.v))
            if key in pairs:
                raise TopologyError(f"duplicate span between nodes {key[0]} and {key[1]}")
            pairs.add(key)
            if not s.cost_km > 0:
                raise TopologyError(f"span {s.id} has nonpositive cost {s.cost_km}")
        if not self.is_connected():
            raise TopologyError("graph is disconnected")
        for n in self.nodes:
            if self.degree(n.id) < 2:
                raise TopologyError(f"node {n.id} has degree {self.degree(n.id)} < 2")
        return self


@dataclass(frozen=True)
class DirectedLinkView:
    incoming: dict[int, tuple[DirectedLink, ...]]
    outgoing: dict[int, tuple[DirectedLink, ...]]


def link_views(graph: NetworkGraph) -> DirectedLinkView:
    """Incoming and outgoing directed links of every node.

    Links are ordered by ``(span id, direction)``.
    """
    incoming: dict[int, list[DirectedLink]] = {n.id: [] for n in graph.nodes}
    outgoing: dict[int, list[DirectedLink]] = {n.id: [] for n in graph.nodes}
    for s in sorted(graph.spans, key=lambda s: s.id):
        for link in (DirectedLink(s.id, 0, s.u, s.v), DirectedLink(s.id, 1, s.v, s.u)):
            outgoing[link.tail].append(link)
            incoming[link.head].append(link)
    return DirectedLinkView(
        incoming={v: tuple(ls) for v, ls in incoming.items()},
        outgoing={v: tuple(ls) for v, ls in outgoing.items()},
    )


def parse_topology(text: str, validate: bool = True) -> NetworkGraph:
    nodes: list[Node] = []
    spans: list[Span] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "node" and len(parts) in (3, 4):
                pop = float(parts[3]) if len(parts) == 4 else 1.0
                if pop < 0:
                    raise ValueError("negative population")
                nodes.append(Node(int(parts[1]), parts[2], pop))
            elif parts[0] == "span" and len(parts) == 5:
                spans.append(Span(int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])))
            else:
                raise ValueError(f"unrecognised record {parts[0]!r}")
        except ValueError as exc:
            raise TopologyError(f"line {lineno}: {exc}") from None
    nodes.sort(key=lambda n: n.id)
    graph = NetworkGraph(tuple(nodes), tuple(spans))
    return graph.validate() if validate else graph


def load_topology(source: str | Path) -> NetworkGraph:
    """Load a topology from a path, or from document text if it contains newlines."""
    if isinstance(source, Path) or "\n" not in source:
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    return parse_topology(text)


def dump_topology(graph: NetworkGraph) -> str:
    lines = [f"node {n.id} {n.name} {n.population!r}" for n in graph.nodes]
    lines += [f"span {s.id} {s.u} {s.v} {s.cost_km!r}" for s in graph.spans]
    return "\n".join(lines) + "\n"


def builtin_topology(name: str) -> NetworkGraph:
    """Load one of the bundled topologies: ``"cost239"`` or ``"nsfnet"``."""
    text = resources.files("codedpath").joinpath("data").joinpath(f"{name}.topo").read_text(encoding="utf-8")
    return parse_topology(text)


def from_edges(edges, n_nodes: int | None = None, validate: bool = True) -> NetworkGraph:
    """Build a graph from ``(u, v, cost)`` triples; span ids follow list order."""
    edges = list(edges)
    if n_nodes is None:
        n_nodes = 1 + max(max(u, v) for u, v, _ in edges)
    graph = NetworkGraph(
        tuple(Node(i, f"n{i}") for i in range(n_nodes)),
        tuple(Span(k, u, v, float(c)) for k, (u, v, c) in enumerate(edges)),
    )
    return graph.validate() if validate else graph
