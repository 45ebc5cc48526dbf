"""Tick-driven simulation of one linear coding trail.

Wiring used at an end node E of connection p (own stream o, partner stream
received over the primary r):

* XOR1 at parity round tau = g + D_p: contrib = o[g] ^ r[g], with r zero when
  the primary symbol never arrived. Both end nodes of an intact connection
  produce the same value, so the pair cancels in every aggregate.
* XOR2 fires at tau + B2(E): contrib ^ c_r, sent towards the previous end node.
* XOR3 fires at tau + B3(E): contrib ^ c_l, sent towards the next end node.
* XOR4 fires at tau + max(B2, B3): c_l ^ c_r ^ o[g] if r[g] arrived, else
  c_l ^ c_r. Either way the result is the partner's data for round g.

Time is counted in ticks and one data round is emitted per tick. Span
delays are rounded up to whole ticks and the buffer depths come from
``timing.buffering_delays`` evaluated on those rounded delays. A failed
span drops every symbol whose round number is at or past the failure round.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cpp import CppInstance, Trail, coding_groups
from .demand import make_demands
from .routing import path_from_nodes, pairwise_disjointness
from .timing import TimingParams, TrailTiming, buffering_delays
from .topology import NetworkGraph, from_edges

MASK = (1 << 64) - 1


class SimulationError(RuntimeError):
    """Inconsistent buffer configuration or a broken invariant."""


class ResyncError(SimulationError):
    """Misalignment larger than the buffers can absorb."""


class StreamSymbol(NamedTuple):
    round: int
    payload: int
    ambulance: bool = False

    def __xor__(self, other: "StreamSymbol") -> "StreamSymbol":
        if other.round != self.round:
            raise SimulationError(f"combining rounds {self.round} and {other.round}")
        return StreamSymbol(self.round, self.payload ^ other.payload, self.ambulance or other.ambulance)


@dataclass(frozen=True)
class FailureEvent:
    span: int
    round: int
    scope: str = "span"

    def __post_init__(self):
        if self.scope not in ("span", "primary-only"):
            raise ValueError("scope must be 'span' or 'primary-only'")


@dataclass(frozen=True)
class Skew:
    """Extra delay on one XOR4 input of one end node from ``start`` onward."""
    end_index: int
    port: str
    start: int
    ticks: int


def quantize(delay: float, tick: float) -> int:
    return max(1, math.ceil(delay / tick - 1e-9))


@dataclass
class SimReport:
    rounds: int
    tick: float
    mode: str
    failure: FailureEvent | None
    order: tuple[tuple[int, str], ...]
    # (connection, receiving role) -> per data round payload / tick / path used
    delivered: dict = field(default_factory=dict)
    arrival: dict = field(default_factory=dict)
    via: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    # (end index, station) -> {parity round: payload}
    stations: dict = field(default_factory=dict)
    decode_delay: dict = field(default_factory=dict)
    conservation_violations: int = 0
    stalls: dict = field(default_factory=dict)
    header_rounds: int = 0

    def exact(self, start: int = 0) -> bool:
        """Every round from ``start`` on was delivered with the right payload."""
        return all(
            self.delivered[key][g] == self.expected[key][g]
            for key in self.expected for g in range(start, self.rounds)
        )

    def to_csv(self) -> str:
        lines = ["connection,end,round,via,latency"]
        for (c, role) in sorted(self.delivered):
            for g in range(self.rounds):
                at = self.arrival[(c, role)][g]
                lat = "" if at is None else str(at - g)
                lines.append(f"{c},{role},{g},{self.via[(c, role)][g] or 'lost'},{lat}")
        return "\n".join(lines) + "\n"


def resync_with_round_numbers(queues: list[deque], depth: int) -> tuple[list[deque], int]:
    """Drop stale symbols until every queue head carries the same round.

    Returns the aligned queues and the number of rounds flushed. Raises
    ResyncError when alignment needs more than ``depth`` flushed rounds or a
    queue runs dry.
    """
    queues = [deque(q) for q in queues]
    flushed = 0
    while True:
        if any(not q for q in queues):
            raise ResyncError("a queue ran dry before the inputs realigned")
        heads = [q[0][0] for q in queues]
        top = max(heads)
        if min(heads) == top:
            return queues, flushed
        for q in queues:
            while q and q[0][0] < top:
                q.popleft()
        flushed += top - min(heads)
        if flushed > depth:
            raise ResyncError(f"skew of {flushed} rounds exceeds buffer depth {depth}")


def simulate(trail: Trail, graph: NetworkGraph, traffic: dict, *, params: TimingParams | None = None,
             tick: float = 1.0, failure: FailureEvent | None = None, mode: str = "proactive",
             rounds: int | None = None, timing: TrailTiming | None = None, skew: Skew | None = None,
             warmup: int = 8) -> SimReport:
    """Run a trail for ``rounds`` data rounds.

    ``traffic`` maps (connection, role) to a uint64 array of payloads the end
    node sends over its primary; role "S" carries u, "T" carries d.
    """
    if trail.kind != "linear":
        raise ValueError("simulate needs a linear trail; split others with timing.linear_pieces")
    if mode not in ("proactive", "two_tier"):
        raise ValueError(f"unknown mode {mode!r}")
    params = params or TimingParams()
    if rounds is None:
        rounds = min(len(v) for v in traffic.values())
    ends = trail.end_nodes
    K = len(ends)
    qd = {e: quantize(graph.span(e).cost_km * params.propagation_speed, tick)
          for e in set(trail.spans) | {e for _, sp in trail.primaries for e in sp}}
    if timing is None:
        timing = buffering_delays(trail, graph, params, span_delays=qd)
    B2 = [int(round(et.B2)) for et in timing.ends]
    B3 = [int(round(et.B3)) for et in timing.ends]
    S = [max(a, b) for a, b in zip(B2, B3)]
    x = [0]
    for e in trail.spans:
        x.append(x[-1] + qd[e])
    pos = [x[en.position] for en in ends]
    prim = dict(trail.primaries)
    prot = dict(trail.protections)
    D = {c: sum(qd[e] for e in prim[c]) for c in prim}
    P = {c: math.ceil(len(prot[c]) * params.M / tick - 1e-9) for c in prot}
    partner = {}
    for k, en in enumerate(ends):
        partner[(en.connection, en.role)] = k
    peer = [partner[(en.connection, "T" if en.role == "S" else "S")] for en in ends]

    prim_fail = {c: failure is not None and failure.span in prim[c] for c in prim}
    trail_fail_seg = [False] * max(K - 1, 0)
    if failure is not None and failure.scope == "span" and failure.span in trail.spans:
        at = trail.spans.index(failure.span)
        for k in range(K - 1):
            lo, hi = ends[k].position, ends[k + 1].position
            trail_fail_seg[k] = lo <= at < hi

    seqs = [[int(v) & MASK for v in traffic[(en.connection, en.role)][:rounds]] for en in ends]
    Dk = [D[en.connection] for en in ends]
    Pk = [P[en.connection] for en in ends]
    fail_round = failure.round if failure is not None else math.inf

    def own(k, g):
        return seqs[k][g] if 0 <= g < rounds else 0

    # partner symbol received over the primary at end k for data round g (None if cut)
    rcv = []
    for k, en in enumerate(ends):
        cut_from = fail_round if prim_fail[en.connection] else rounds
        rcv.append([seqs[peer[k]][g] if g < cut_from else None for g in range(rounds)])

    max_tau = rounds + max(Dk)
    horizon = max_tau + max(S) + 2 + (2 * skew.ticks if skew else 0)
    report = SimReport(rounds, tick, mode, failure, tuple((en.connection, en.role) for en in ends))
    contrib = [[0] * max_tau for _ in range(K)]
    gated = [[False] * max_tau for _ in range(K)]
    xor2 = [[None] * max_tau for _ in range(K)]
    xor3 = [[None] * max_tau for _ in range(K)]
    xor4 = [[None] * max_tau for _ in range(K)]
    for k in range(K):
        report.stations[(k, "contrib")] = contrib[k]
        report.stations[(k, "xor2")] = xor2[k]
        report.stations[(k, "xor3")] = xor3[k]
        report.stations[(k, "xor4")] = xor4[k]
    for k, en in enumerate(ends):
        key = (en.connection, en.role)
        report.expected[key] = seqs[peer[k]][:]
        report.delivered[key] = [v for v in rcv[k]]
        report.arrival[key] = [None if v is None else g + Dk[k] for g, v in enumerate(rcv[k])]
        report.via[key] = [None if v is None else "primary" for v in rcv[k]]
        report.decode_delay[key] = Dk[k] + S[k] + Pk[k]

    # input queues per end node: right aggregate, left aggregate, and the decoder's copies of each
    R, L, R4, L4 = 0, 1, 2, 3
    RR4, LL4 = (R, R4), (L, L4)
    queues = [[deque() for _ in range(K)] for _ in range(4)]
    inbox: dict[int, list] = {}
    skew_port = None
    if skew is not None:
        skew_port = {"c_r": R4, "c_l": L4}[skew.port]
        if not 0 <= skew.end_index < K or (skew.port == "c_r" and skew.end_index == K - 1) \
                or (skew.port == "c_l" and skew.end_index == 0) or skew.ticks < 0:
            raise ValueError(f"end node {skew.end_index} has no {skew.port} input to skew")
    offset4 = [0] * K
    stalls = [0] * K

    def route(now, when, target, ports, sym):
        # copy and forward: one copy feeds the encoder, the other the decoder
        if skew_port is not None and target == skew.end_index and sym[0] >= skew.start:
            for port in ports:
                at = when + skew.ticks if port == skew_port else when
                if at == now:
                    queues[port][target].append(sym)
                else:
                    inbox.setdefault(at, []).append((target, (port,), sym))
        elif when == now:
            for port in ports:
                queues[port][target].append(sym)
        else:
            box = inbox.get(when)
            if box is None:
                inbox[when] = [(target, ports, sym)]
            else:
                box.append((target, ports, sym))

    def take(dq, rnd):
        # round-number discipline: stale symbols are flushed, newer ones wait
        while dq and dq[0][0] < rnd:
            dq.popleft()
        if dq and dq[0][0] == rnd:
            return dq.popleft()
        return None

    def missing(k, rnd):
        if rnd < fail_round:
            raise SimulationError(f"end node {k}: input for round {rnd} missing; buffers too shallow")

    headers_until = warmup
    for t in range(horizon):
        for target, ports, sym in inbox.pop(t, ()):
            for port in ports:
                queues[port][target].append(sym)
        if t < max_tau:
            for k in range(K):
                g = t - Dk[k]
                if 0 <= g < rounds:
                    got = rcv[k][g]
                    contrib[k][t] = seqs[k][g] ^ (got or 0)
                    gated[k][t] = got is not None
        # aggregates run right to left through XOR2 and left to right through XOR3
        for k in range(K - 1, -1, -1):
            tau = t - B2[k]
            if not 0 <= tau < max_tau:
                continue
            if k == K - 1:
                side = 0
            else:
                dq = queues[R][k]
                sym = dq.popleft() if dq and dq[0][0] == tau else take(dq, tau)
                if sym is None:
                    missing(k, tau)
                    continue
                side = sym[1]
            v = contrib[k][tau] ^ side
            xor2[k][tau] = v
            if k > 0 and not (trail_fail_seg[k - 1] and tau >= fail_round):
                route(t, t + pos[k] - pos[k - 1], k - 1, RR4, (tau, v))
        for k in range(K):
            tau = t - B3[k]
            if not 0 <= tau < max_tau:
                continue
            if k == 0:
                side = 0
            else:
                dq = queues[L][k]
                sym = dq.popleft() if dq and dq[0][0] == tau else take(dq, tau)
                if sym is None:
                    missing(k, tau)
                    continue
                side = sym[1]
            v = contrib[k][tau] ^ side
            xor3[k][tau] = v
            if k < K - 1 and not (trail_fail_seg[k] and tau >= fail_round):
                route(t, t + pos[k + 1] - pos[k], k + 1, LL4, (tau, v))
        for k in range(K):
            tau = t - S[k] - offset4[k]
            if not 0 <= tau < max_tau:
                continue
            if skew is not None and k == skew.end_index and tau >= skew.start:
                # round numbers back on: wait for the late input instead of mixing rounds
                headers_until = max(headers_until, t + 1)
                ready = all(k == edge or any(s[0] == tau for s in queues[port][k])
                            for port, edge in ((R4, K - 1), (L4, 0)))
                if not ready:
                    stalls[k] += 1
                    offset4[k] += 1
                    if stalls[k] > Dk[k] + S[k]:
                        raise ResyncError(f"end node {k}: skew exceeds buffer depth {Dk[k] + S[k]}")
                    continue
            a = (tau, 0) if k == K - 1 else take(queues[R4][k], tau)
            b = (tau, 0) if k == 0 else take(queues[L4][k], tau)
            if a is None or b is None:
                missing(k, tau)
                continue
            if a[0] != b[0]:
                raise SimulationError(f"combining rounds {a[0]} and {b[0]}")
            both = a[1] ^ b[1]
            if tau < fail_round and both != contrib[k][tau]:
                report.conservation_violations += 1
            g = tau - Dk[k]
            dec = both ^ seqs[k][g] if gated[k][tau] else both
            xor4[k][tau] = dec
            if 0 <= g < rounds:
                key = (ends[k].connection, ends[k].role)
                at = t + Pk[k]
                cur = report.arrival[key][g]
                if cur is None or at < cur:
                    report.delivered[key][g] = dec
                    report.arrival[key][g] = at
                    report.via[key][g] = "decoded"
    report.stalls = {k: n for k, n in enumerate(stalls) if n}
    report.header_rounds = headers_until

    if mode == "two_tier" and failure is not None:
        for k, en in enumerate(ends):
            c = en.connection
            if not prim_fail[c]:
                continue
            detect = failure.round + D[c] + 1
            dist = abs(pos[k] - pos[peer[k]])
            # the peer's own data, flagged, runs straight along the trail
            for g in range(failure.round, rounds):
                t = max(detect, g) + dist + P[c]
                _deliver(report, (c, en.role), g, own(peer[k], g), t, "ambulance")
    return report


def _deliver(report, key, g, payload, t, via):
    cur = report.arrival[key][g]
    if cur is not None and cur <= t:
        return
    report.delivered[key][g] = payload
    report.arrival[key][g] = t
    report.via[key][g] = via


def measure_recovery(report: SimReport, failure: FailureEvent | None = None, role: str = "T") -> dict[int, int]:
    """Ticks from the failure round until decoded delivery resumes, per connection.

    Connections never interrupted report 0. A connection that loses rounds and
    never gets them back raises SimulationError.
    """
    failure = failure or report.failure
    if failure is None:
        raise ValueError("no failure in this run")
    out = {}
    for (c, r), via in report.via.items():
        if r != role:
            continue
        lost = [g for g in range(failure.round, report.rounds) if via[g] != "primary"]
        if not lost:
            out[c] = 0
            continue
        if any(via[g] is None for g in lost):
            raise SimulationError(f"connection {c} never recovers")
        out[c] = report.arrival[(c, r)][lost[0]] - failure.round
    return out


def random_payloads(connections, rounds: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    out = {}
    for c in sorted(connections):
        for role in ("S", "T"):
            out[(c, role)] = rng.integers(0, 2**63, size=rounds, dtype=np.uint64) * 2 + \
                rng.integers(0, 2, size=rounds, dtype=np.uint64)
    return out


@dataclass
class TrailScenario:
    graph: NetworkGraph
    instance: CppInstance
    trail: Trail


def random_trail(n_conn: int, rng: np.random.Generator, unit_km: float = 200.0, max_units: int = 3) -> TrailScenario:
    """A line-shaped coding trail with span lengths that are whole multiples of ``unit_km``.

    Each connection's primary is a fresh chain of nodes, so primaries are
    disjoint from each other and from the trail.
    """
    while True:
        length = int(rng.integers(max(1, n_conn), 2 * n_conn + 2))
        ends = [tuple(sorted(rng.choice(length + 1, size=2, replace=False).tolist())) for _ in range(n_conn)]
        covered = set()
        for a, b in ends:
            covered.update(range(a, b))
        if covered == set(range(length)):
            break
    edges = [(v, v + 1, unit_km * int(rng.integers(1, max_units + 1))) for v in range(length)]
    nxt = length + 1
    chains = []
    for a, b in ends:
        hops = int(rng.integers(2, 4))  # at least one fresh node keeps the graph simple
        nodes = [a] + list(range(nxt, nxt + hops - 1)) + [b]
        nxt += hops - 1
        for u, v in zip(nodes, nodes[1:]):
            edges.append((u, v, unit_km * int(rng.integers(1, max_units + 1))))
        chains.append(nodes)
    graph = from_edges(edges, n_nodes=nxt, validate=False)
    flip = rng.integers(0, 2, size=n_conn)
    pairs = [(b, a) if f else (a, b) for (a, b), f in zip(ends, flip)]
    demands = make_demands(pairs)
    primaries = [path_from_nodes(graph, ch if not f else ch[::-1], i) for i, (ch, f) in enumerate(zip(chains, flip))]
    routes = []
    for i, (s, d) in enumerate(pairs):
        step = 1 if d > s else -1
        routes.append(path_from_nodes(graph, list(range(s, d + step, step)), i))
    inst = CppInstance(graph, demands, primaries, routes, pairwise_disjointness(primaries), 1)
    (group,) = coding_groups(inst, [0] * n_conn)
    (trail,) = group.trails
    return TrailScenario(graph, inst, trail)


def parse_scenario(text: str) -> dict:
    """Read a scenario file into a dict of settings.

    Records: ``topology``, ``traffic``, ``trail``, ``tick``, ``rounds``, ``seed``,
    ``fail <span> <round>``, ``mode``, ``payload <connection> <seed>``.
    """
    out: dict = {"fail": None, "mode": "proactive", "payload_seeds": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        try:
            if key == "fail":
                out["fail"] = FailureEvent(int(rest[0]), int(rest[1]))
            elif key == "mode":
                if rest[0] not in ("proactive", "two_tier"):
                    raise ValueError(f"unknown mode {rest[0]!r}")
                out["mode"] = rest[0]
            elif key == "payload":
                out["payload_seeds"][int(rest[0])] = int(rest[1])
            elif key in ("trail", "rounds", "seed", "partition-size", "repeat"):
                out[key] = int(rest[0])
            elif key in ("tick", "length-limit"):
                out[key] = float(rest[0])
            elif key in ("topology", "traffic", "network"):
                out[key] = rest[0]
            else:
                raise ValueError(f"unknown record {key!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"scenario line {lineno}: {exc}") from None
    return out
