"""Buffering delays on coding trails and analytic restoration times.

End nodes of a linear trail are taken in trail order. For an end node E the
set R holds the end nodes after E and L those before it. The aggregate from
the R side must wait for the farthest contributor in R plus one cancelling
delay per connection whose two end nodes both sit in R::

    B2(E) = max_{P in R} PD(P, E) + sum_{p: S_p, T_p in R} CD_p

and B3 is the same over L. All delays are in milliseconds.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

from .cpp import EndNode, Trail
from .routing import RoutedPath
from .topology import NetworkGraph

DEFAULT_M = {"opaque": 0.3, "transparent": 0.01}


@dataclass(frozen=True)
class TimingParams:
    M: float | None = None
    X: float = 1.0
    F: float = 10.0
    propagation_speed: float = 0.005
    network_kind: str = "opaque"

    def __post_init__(self):
        if self.network_kind not in DEFAULT_M:
            raise ValueError(f"unknown network kind {self.network_kind!r}")
        if self.M is None:
            object.__setattr__(self, "M", DEFAULT_M[self.network_kind])
        for name in ("M", "X", "F", "propagation_speed"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def with_x(self, X: float) -> "TimingParams":
        return replace(self, X=X)


@dataclass(frozen=True)
class EndNodeTiming:
    end: EndNode
    B2: float
    B3: float
    # (signal, delay) pairs buffered at XOR4, e.g. (("c_r", 1.5), ("u", 3.0))
    xor4: tuple[tuple[str, float], ...]

    @property
    def S(self) -> float:
        return max(self.B2, self.B3)


@dataclass(frozen=True)
class TrailTiming:
    trail: Trail
    ends: tuple[EndNodeTiming, ...]
    S: float
    upper_bound: bool = False

    def at(self, connection: int, role: str) -> EndNodeTiming:
        for et in self.ends:
            if et.end.connection == connection and et.end.role == role:
                return et
        raise KeyError((connection, role))

    def sync_delay(self, connection: int) -> float:
        """Decode-side synchronisation delay of a connection (at its destination)."""
        return self.at(connection, "T").S


@dataclass(frozen=True)
class RtInputs:
    d_sd: float
    h_b: int
    h_is: int
    S: float = 0.0

    def __post_init__(self):
        if self.h_b < 1:
            raise ValueError("protection path needs at least one hop")
        if self.h_is < 0 or self.d_sd < 0 or self.S < 0:
            raise ValueError("timing inputs must be nonnegative")


def xor4_rule(B2: float, B3: float) -> tuple[tuple[str, float], ...]:
    if B2 <= B3:
        return (("c_r", B3 - B2), ("u", B3))
    return (("c_l", B2 - B3), ("u", B2))


def trail_positions(trail: Trail, graph: NetworkGraph, params: TimingParams, span_delays=None) -> list[float]:
    """Cumulative delay from the first trail node to each trail node."""
    out = [0.0]
    for e in trail.spans:
        d = span_delays[e] if span_delays is not None else graph.span(e).cost_km * params.propagation_speed
        out.append(out[-1] + d)
    return out


def _linear_timing(ends, pos, reverse=False) -> tuple[EndNodeTiming, ...]:
    """B2/B3 for end nodes in trail order; ``pos`` maps each end node to its delay offset."""
    order = list(reversed(ends)) if reverse else list(ends)
    x = [pos[k] for k in (reversed(range(len(ends))) if reverse else range(len(ends)))]
    out = []
    for k, E in enumerate(order):
        sides = []
        for side in (range(k + 1, len(order)), range(k)):
            members = list(side)
            if not members:
                sides.append(0.0)
                continue
            far = max(abs(x[q] - x[k]) for q in members)
            where: dict[int, list[int]] = {}
            for q in members:
                where.setdefault(order[q].connection, []).append(q)
            cancel = sum(abs(x[qs[0]] - x[qs[1]]) for qs in where.values() if len(qs) == 2)
            sides.append(far + cancel)
        B2, B3 = sides
        out.append(EndNodeTiming(E, B2, B3, xor4_rule(B2, B3)))
    return tuple(out)


def buffering_delays(trail: Trail, graph: NetworkGraph, params: TimingParams,
                     span_delays=None, reverse: bool = False) -> TrailTiming:
    """Buffering delays at every end node of a trail.

    ``reverse`` swaps the arbitrary left/right labelling. Non-linear trails are
    split into linear pieces and flagged as upper-bound estimates; the
    reported B2/B3 of an end node are the largest over the pieces holding it.
    """
    if not trail.end_nodes:
        raise ValueError("trail has no connections")
    if trail.kind == "linear":
        xs = trail_positions(trail, graph, params, span_delays)
        pos = [xs[en.position] for en in trail.end_nodes]
        ends = _linear_timing(trail.end_nodes, pos, reverse)
        if reverse:
            ends = tuple(reversed(ends))
        return TrailTiming(trail, ends, max(et.S for et in ends), False)
    best: dict[tuple[int, str], EndNodeTiming] = {}
    for piece in linear_pieces(trail, graph):
        for et in buffering_delays(piece, graph, params, span_delays, reverse).ends:
            key = (et.end.connection, et.end.role)
            if key not in best or et.S > best[key].S:
                best[key] = et
    ends = []
    for en in trail.end_nodes:
        et = best[(en.connection, en.role)]
        ends.append(EndNodeTiming(en, et.B2, et.B3, et.xor4))
    return TrailTiming(trail, tuple(ends), max(et.S for et in ends), True)


def linear_pieces(trail: Trail, graph: NetworkGraph) -> list[Trail]:
    """Linear sub-trails covering a branching or cyclic trail.

    Branching trees give one piece per leaf-to-leaf path; cyclic unions give
    one piece per member protection path. Each piece carries every end node
    lying on it, so every end node appears in at least one piece.
    """
    adj: dict[int, list[tuple[int, int]]] = {}
    for e in trail.spans:
        sp = graph.span(e)
        adj.setdefault(sp.u, []).append((sp.v, e))
        adj.setdefault(sp.v, []).append((sp.u, e))
    paths: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    if trail.kind == "branching":
        leaves = sorted(v for v, nb in adj.items() if len(nb) == 1)
        for a, b in itertools.combinations(leaves, 2):
            paths.append(_tree_path(adj, a, b))
    else:
        for c, spans in trail.protections:
            paths.append(_orient(graph, spans))
    pieces = []
    for nodes, spans in paths:
        pos = {v: k for k, v in enumerate(nodes)}
        ends = sorted((EndNode(en.connection, en.role, en.node, pos[en.node])
                       for en in trail.end_nodes if en.node in pos),
                      key=lambda en: (en.position, en.connection, en.role))
        if not ends:
            continue
        conns = {en.connection for en in ends}
        pieces.append(Trail(trail.group, "linear", nodes, spans, tuple(ends),
                            tuple(p for p in trail.primaries if p[0] in conns),
                            tuple(p for p in trail.protections if p[0] in conns)))
    return pieces


def _tree_path(adj, a, b):
    prev = {a: None}
    stack = [a]
    while stack:
        v = stack.pop()
        for w, e in sorted(adj[v]):
            if w not in prev:
                prev[w] = (v, e)
                stack.append(w)
    nodes, spans = [b], []
    while prev[nodes[-1]] is not None:
        v, e = prev[nodes[-1]]
        nodes.append(v)
        spans.append(e)
    return tuple(reversed(nodes)), tuple(reversed(spans))


def _orient(graph, spans):
    """Node sequence of a simple path given its spans in path order."""
    if len(spans) == 1:
        sp = graph.span(spans[0])
        return (min(sp.u, sp.v), max(sp.u, sp.v)), tuple(spans)
    first, second = graph.span(spans[0]), graph.span(spans[1])
    start = first.u if first.v in second.endpoints else first.v
    nodes = [start]
    for e in spans:
        nodes.append(graph.span(e).other(nodes[-1]))
    return tuple(nodes), tuple(spans)


# ------------------------------------------------------------ restoration time
def rt_cpp1(inp: RtInputs, params: TimingParams) -> float:
    return inp.d_sd + inp.h_b * params.M + inp.S


def rt_cpp2(inp: RtInputs, params: TimingParams) -> float:
    return params.F + 2 * inp.d_sd + (inp.h_is + 1) * params.M + (inp.h_b + 1) * params.M


def rt_cpp(inp: RtInputs, params: TimingParams) -> float:
    """Proactive recovery, or the faster two-tier path in opaque networks."""
    if params.network_kind == "transparent":
        return rt_cpp1(inp, params)
    return min(rt_cpp1(inp, params), rt_cpp2(inp, params))


def rt_spp(inp: RtInputs, params: TimingParams, mode: int = 1) -> float:
    """``mode`` 1 assumes a separate control plane, 2 in-band signalling."""
    F, M, X, d, hb, hi = params.F, params.M, params.X, inp.d_sd, inp.h_b, inp.h_is
    if mode == 1:
        return F + 2 * d + (hi + 1) * M + X + (hb + 1) * M
    if mode == 2:
        return F + d + (hi + 1) * M + (hb + 1) * X + 2 * d + 2 * (hb + 1) * M
    raise ValueError("mode must be 1 or 2")


SCHEMES = ("CPP", "SPP1", "SPP2")


def scheme_rt(scheme: str, inp: RtInputs, params: TimingParams) -> float:
    if scheme == "CPP":
        return rt_cpp(inp, params)
    return rt_spp(inp, params, int(scheme[-1]))


@dataclass(frozen=True)
class ConnectionPlan:
    connection: int
    primary: RoutedPath
    protection: RoutedPath
    S: float = 0.0

    def inputs(self, params: TimingParams, failed_position: int) -> RtInputs:
        # the upstream end of the failed span detects, so it sits failed_position hops from the source
        return RtInputs(params.propagation_speed * self.primary.length_km,
                        self.protection.hop_count, failed_position, self.S)


@dataclass(frozen=True)
class WorstCase:
    scheme: str
    X: float
    rt: float
    connection: int
    h_b: int
    h_is: int


def worst_case_rt(plans, params: TimingParams, scheme: str) -> WorstCase:
    """Largest restoration time over connections and failed primary spans.

    Ties keep the lowest connection index and failure position.
    """
    best = None
    for plan in plans:
        for pos in range(plan.primary.hop_count):
            inp = plan.inputs(params, pos)
            rt = scheme_rt(scheme, inp, params)
            if best is None or rt > best.rt:
                best = WorstCase(scheme, params.X, rt, plan.connection, inp.h_b, inp.h_is)
    if best is None:
        raise ValueError("no connections")
    return best


def sync_delays(timings) -> dict[int, float]:
    """Per-connection decode-side delay from a set of trail timings."""
    out: dict[int, float] = {}
    for tt in timings:
        for et in tt.ends:
            if et.end.role == "T":
                out[et.end.connection] = max(out.get(et.end.connection, 0.0), et.S)
    return out


def is_aligned(et: EndNodeTiming, tol: float = 1e-9) -> bool:
    """The three XOR4 inputs line up once buffered: c_r at B2, c_l at B3, u at 0."""
    arrive = {"c_r": et.B2, "c_l": et.B3, "u": 0.0}
    for sig, delay in et.xor4:
        arrive[sig] += delay
    return math.isclose(max(arrive.values()), min(arrive.values()), abs_tol=tol)
