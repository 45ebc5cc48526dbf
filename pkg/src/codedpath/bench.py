"""End-to-end comparison runs: partition, sharing heuristic, both ILPs, timing.

A run repeats the pipeline over several seeded partitions of the demand set,
averages SCaP over repeats and keeps the worst restoration time seen in any
repeat. Reports carry no wall-clock data so identical scenarios render to
identical bytes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coloring import min_colors
from .cpp import CodingGroup, CppInstance, convert
from .demand import generate_gravity, generate_uniform, load_demands, partition
from .spp import SppInstance, scap, simple_spp, solve_spp
from .timing import SCHEMES, ConnectionPlan, TimingParams, WorstCase, buffering_delays, sync_delays, worst_case_rt
from .topology import NetworkGraph, builtin_topology, load_topology

DEFAULT_LIMITS = {"cost239": 4000.0, "nsfnet": 6000.0}
BUILTIN = ("cost239", "nsfnet")


class ReportError(AssertionError):
    """A report-level invariant failed."""


@dataclass(frozen=True)
class Scenario:
    topology: str = "cost239"
    traffic: str = "uniform"
    gravity_count: int = 150
    network: str = "opaque"
    T: int | None = None
    C: int | None = None
    length_limit: float | None = None
    partition_size: int = 20
    repeats: int = 10
    seed: int = 1
    x_values: tuple[float, ...] = (0.5, 1.0, 5.0, 10.0)
    F: float = 10.0
    M: float | None = None
    propagation_speed: float = 0.005
    method: str = "highs"
    time_budget: float = 60.0
    workers: int = 1
    sim_check: bool = False

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.x_values:
            raise ValueError("at least one X value is required")
        if any(not x > 0 for x in self.x_values):
            raise ValueError("X values must be positive")
        if self.partition_size < 1:
            raise ValueError("partition size must be >= 1")
        if self.network not in ("opaque", "transparent"):
            raise ValueError(f"unknown network kind {self.network!r}")

    @property
    def name(self) -> str:
        return Path(self.topology).stem if self.topology not in BUILTIN else self.topology

    def graph(self) -> NetworkGraph:
        return builtin_topology(self.topology) if self.topology in BUILTIN else load_topology(Path(self.topology))

    def limit(self) -> float:
        if self.length_limit is not None:
            return self.length_limit
        return DEFAULT_LIMITS.get(self.name, math.inf)

    def demands(self, graph: NetworkGraph):
        if self.traffic == "uniform":
            return generate_uniform(graph)
        if self.traffic == "gravity":
            return generate_gravity(graph, self.gravity_count, self.seed)
        return load_demands(Path(self.traffic))

    def params(self, X: float | None = None) -> TimingParams:
        return TimingParams(self.M, X if X is not None else self.x_values[0], self.F,
                            self.propagation_speed, self.network)


@dataclass
class GroupResult:
    repeat: int
    group: int
    size: int
    T: int
    C: int
    working_km: float
    spp_spare: float
    cpp_spare: float
    spp_status: str
    cpp_status: str
    spp_gap: float
    cpp_gap: float
    nodes: int
    plans: list[ConnectionPlan] = field(default_factory=list)
    coding: list[CodingGroup] = field(default_factory=list)
    sim_checked: int = 0


@dataclass
class BenchReport:
    scenario: Scenario
    n_nodes: int
    n_spans: int
    scap: dict[str, float]
    rt: dict[str, dict[float, WorstCase]]
    repeat_scap: list[tuple[float, float]]
    rows: list[GroupResult]

    @property
    def solver_stats(self) -> dict:
        statuses = [r.spp_status for r in self.rows] + [r.cpp_status for r in self.rows]
        return {
            "models": len(statuses),
            "optimal": statuses.count("optimal"),
            "timeout": statuses.count("timeout"),
            "max_gap": max([r.spp_gap for r in self.rows] + [r.cpp_gap for r in self.rows]),
            "sim_checked": sum(r.sim_checked for r in self.rows),
        }

    def check(self) -> None:
        """Assert the report-level invariants."""
        cpp_rt = {round(w.rt, 9) for w in self.rt["CPP"].values()}
        if len(cpp_rt) != 1:
            raise ReportError("CPP restoration time varies with X")
        if self.scap["CPP"] < self.scap["SPP1"] - 1e-9:
            raise ReportError("CPP SCaP below SPP SCaP")
        if self.scap["SPP1"] != self.scap["SPP2"]:
            raise ReportError("SPP rows disagree on SCaP")
        for r in self.rows:
            if r.spp_status == r.cpp_status == "optimal" and r.T == r.C and r.cpp_spare < r.spp_spare - 1e-6:
                raise ReportError(f"repeat {r.repeat} group {r.group}: CPP spare below SPP spare")


def _solve_group(args):
    scenario, repeat, gi, group, offset = args
    graph = scenario.graph()
    inst = SppInstance.build(graph, group, length_limit=scenario.limit())
    routes = simple_spp(inst)
    ci = CppInstance.from_spp(inst, routes)
    T = scenario.T
    C = scenario.C or T
    if C is None:
        # smallest group count that can satisfy the coding rule; SPP uses the same bound
        C = min_colors(ci.conflict())
    T = T or C
    spp = solve_spp(inst, routes, T=T, method=scenario.method, time_budget=scenario.time_budget)
    _check_scap_inputs(graph, inst, spp)
    cpp, coding = convert(spp, ci, C=C, method=scenario.method, time_budget=scenario.time_budget, offset=offset)
    params = scenario.params()
    timings = [buffering_delays(tr, graph, params) for g in coding for tr in g.trails]
    S = sync_delays(timings)
    plans = [ConnectionPlan(dm.index, inst.primaries[i], routes[i], S[dm.index]) for i, dm in enumerate(inst.demands)]
    res = GroupResult(repeat, gi, len(group), T, C, inst.working_km, spp.spare_cost, cpp.spare_cost,
                      spp.status, cpp.status, spp.gap, cpp.gap, spp.nodes_explored + cpp.nodes_explored,
                      plans, coding)
    if scenario.sim_check:
        res.sim_checked = smoke_simulate(graph, ci, coding, params, seed=scenario.seed + repeat)
    return (repeat, gi), res


def _check_scap_inputs(graph, inst, spp):
    costs = np.array([s.cost_km for s in sorted(graph.spans, key=lambda s: s.id)])
    spare = float(costs @ spp.a_matrix(graph.n_spans).sum(axis=1))
    if not math.isclose(spare, spp.spare_cost, rel_tol=1e-9):
        raise ReportError("spare cost disagrees with the reserved-wavelength map")
    working = float(sum(costs[list(p.spans)].sum() for p in inst.primaries))
    if not math.isclose(working, inst.working_km, rel_tol=1e-9):
        raise ReportError("working capacity disagrees with the primary routes")


def smoke_simulate(graph, instance: CppInstance, coding, params, seed: int = 1, rounds: int = 60) -> int:
    """Fail one primary per linear trail and check exact recovery; return trails checked."""
    from .trailsim import FailureEvent, SimulationError, random_payloads, simulate

    checked = 0
    for group in coding:
        for trail in group.trails:
            if trail.kind != "linear":
                continue
            for c, prim in trail.primaries:
                free = [e for e in prim if e not in trail.spans]
                if not free:
                    continue
                traffic = random_payloads(trail.connections, rounds, seed)
                rep = simulate(trail, graph, traffic, params=params, failure=FailureEvent(free[0], rounds // 3),
                               rounds=rounds)
                if not rep.exact():
                    raise SimulationError(f"group {group.index}: decoding failed for connection {c}")
                checked += 1
                break
    return checked


def run(scenario: Scenario) -> BenchReport:
    graph = scenario.graph()
    demands = scenario.demands(graph)
    tasks = []
    for r in range(scenario.repeats):
        parts = partition(demands, scenario.partition_size, scenario.seed + r)
        for gi, group in enumerate(parts.groups):
            tasks.append((scenario, r, gi, group, 1000 * gi))
    if scenario.workers > 1:
        with ProcessPoolExecutor(scenario.workers) as pool:
            results = dict(pool.map(_solve_group, tasks))
    else:
        results = dict(map(_solve_group, tasks))
    rows = [results[k] for k in sorted(results)]
    repeat_scap = []
    for r in range(scenario.repeats):
        mine = [row for row in rows if row.repeat == r]
        work = sum(row.working_km for row in mine)
        repeat_scap.append((scap(work, sum(row.spp_spare for row in mine)),
                            scap(work, sum(row.cpp_spare for row in mine))))
    spp_mean = float(np.mean([a for a, _ in repeat_scap]))
    cpp_mean = float(np.mean([b for _, b in repeat_scap]))
    plans = [p for row in rows for p in row.plans]
    rt = {s: {} for s in SCHEMES}
    for X in scenario.x_values:
        params = scenario.params(X)
        for s in SCHEMES:
            rt[s][X] = worst_case_rt(plans, params, s)
    report = BenchReport(scenario, graph.n_nodes, graph.n_spans,
                         {"CPP": cpp_mean, "SPP1": spp_mean, "SPP2": spp_mean}, rt, repeat_scap, rows)
    report.check()
    return report


def _fmt_x(x: float) -> str:
    return f"{x:g}ms"


def table(report: BenchReport) -> list[list[str]]:
    xs = report.scenario.x_values
    out = [["Scheme", "SCaP"] + [_fmt_x(x) for x in xs]]
    for s in SCHEMES:
        out.append([s, f"{report.scap[s]:.1f}%"] + [f"{report.rt[s][x].rt:.2f}" for x in xs])
    return out


def emit(report: BenchReport, fmt: str = "markdown") -> str:
    """Render the comparison table as CSV or an aligned Markdown table."""
    rows = table(report)
    sc = report.scenario
    title = (f"{sc.name} network, {report.n_nodes} nodes, {report.n_spans} spans, "
             f"{sc.traffic} traffic, {sc.network}, {sc.repeats} repeats, seed {sc.seed}")
    if fmt == "csv":
        head = ["scheme", "scap"] + [f"rt_{x:g}" for x in sc.x_values]
        lines = [",".join(head)]
        for row in rows[1:]:
            lines.append(",".join([row[0], row[1].rstrip("%")] + row[2:]))
        return "\n".join(lines) + "\n"
    if fmt != "markdown":
        raise ValueError(f"unknown format {fmt!r}")
    widths = [max(len(r[k]) for r in rows) for k in range(len(rows[0]))]

    def line(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

    out = [f"**{title}**", "", line(rows[0]), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out += [line(r) for r in rows[1:]]
    stats = report.solver_stats
    out += ["", f"models solved: {stats['models']} ({stats['optimal']} optimal, {stats['timeout']} timeout, "
                f"max gap {stats['max_gap']:.4f})"]
    worst = report.rt["SPP2"][sc.x_values[-1]]
    out.append(f"worst SPP2 connection at X={sc.x_values[-1]:g}ms: {worst.connection} (h_b={worst.h_b})")
    return "\n".join(out) + "\n"


def run_scenario_file(text: str, base: Path = Path(".")) -> str:
    """Plan one partition group, then simulate the requested coding trail.

    Returns the simulator CSV followed by ``# recovery`` comment lines.
    """
    from .trailsim import parse_scenario, simulate, measure_recovery, random_payloads

    cfg = parse_scenario(text)
    if "trail" not in cfg:
        raise ValueError("scenario needs a 'trail <group-id>' record")
    topo = cfg.get("topology", "cost239")
    if topo not in BUILTIN:
        topo = str((base / topo).resolve())
    traffic = cfg.get("traffic", "uniform")
    if traffic not in ("uniform", "gravity"):
        traffic = str((base / traffic).resolve())
    sc = Scenario(topology=topo, traffic=traffic, network=cfg.get("network", "opaque"),
                  length_limit=cfg.get("length-limit"), partition_size=cfg.get("partition-size", 20),
                  seed=cfg.get("seed", 1), repeats=1)
    graph = sc.graph()
    repeat = cfg.get("repeat", 0)
    gid = cfg["trail"]
    groups = partition(sc.demands(graph), sc.partition_size, sc.seed + repeat).groups
    if not 0 <= gid // 1000 < len(groups):
        raise ValueError(f"no partition group for coding group {gid}")
    _, res = _solve_group((sc, repeat, gid // 1000, groups[gid // 1000], 1000 * (gid // 1000)))
    coding = {g.index: g for g in res.coding}
    if gid not in coding:
        raise ValueError(f"coding group {gid} does not exist; groups are {sorted(coding)}")
    linear = [t for t in coding[gid].trails if t.kind == "linear"]
    if not linear:
        kinds = sorted({t.kind for t in coding[gid].trails})
        raise ValueError(f"coding group {gid} has no linear trail (kinds: {', '.join(kinds)})")
    trail = linear[0]
    rounds = cfg.get("rounds", 100)
    payload = {}
    for c in trail.connections:
        seeds = random_payloads([c], rounds, cfg["payload_seeds"].get(c, sc.seed + c))
        payload.update(seeds)
    rep = simulate(trail, graph, payload, params=sc.params(), tick=cfg.get("tick", 1.0),
                   failure=cfg["fail"], mode=cfg["mode"], rounds=rounds)
    out = rep.to_csv()
    if cfg["fail"] is not None:
        for c, lat in sorted(measure_recovery(rep).items()):
            out += f"# recovery connection {c}: {lat} ticks\n"
    out += f"# exact {rep.exact()}\n"
    return out
