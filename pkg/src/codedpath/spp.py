"""Shared path protection: sharing heuristic and wavelength-continuity ILP.

Variable naming in the ILP (indices are positions inside the instance):

* ``y_i{i}_e{e}_f`` / ``y_i{i}_e{e}_r``: protection of i uses span e in the
  u->v / v->u direction. Span usage is the sum of the two.
* ``n_i{i}_t{t}``: protection of i is on wavelength t.
* ``a_e{e}_t{t}``: wavelength t is reserved on span e.
* ``k_i{i}_j{j}`` (i < j): protection paths of i and j are span-disjoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import milp
from .coloring import is_colorable, max_clique, min_colors
from .demand import DemandSet
from .routing import RoutedPath, pairwise_disjointness, path_from_nodes, route_primaries, simple_paths
from .topology import NetworkGraph, link_views


class InfeasibleError(RuntimeError):
    """No feasible plan; ``minimum`` carries the smallest feasible bound if known."""

    def __init__(self, message: str, minimum: int | None = None, demand: int | None = None):
        super().__init__(message)
        self.minimum = minimum
        self.demand = demand


@dataclass
class SppInstance:
    graph: NetworkGraph
    demands: DemandSet
    primaries: list[RoutedPath]
    m: np.ndarray
    T: int | None = None
    length_limit: float = math.inf

    def __post_init__(self):
        if len(self.primaries) != len(self.demands):
            raise ValueError("one primary per demand required")
        if self.T is not None and self.T < 1:
            raise ValueError("T must be >= 1")
        if not np.array_equal(self.m, self.m.T):
            raise ValueError("disjointness matrix must be symmetric")

    @classmethod
    def build(cls, graph, demands, T=None, length_limit=math.inf) -> "SppInstance":
        primaries = route_primaries(graph, demands)
        return cls(graph, tuple(demands), primaries, pairwise_disjointness(primaries), T, length_limit)

    @property
    def size(self) -> int:
        return len(self.demands)

    @property
    def working_km(self) -> float:
        return sum(p.length_km for p in self.primaries)


@dataclass
class SppSolution:
    routes: list[RoutedPath]
    wavelength: list[int]
    reserved: dict[int, frozenset[int]]
    k: np.ndarray
    spare_cost: float
    T: int
    status: str = "optimal"
    nodes_explored: int = 0
    gap: float = 0.0
    extra: dict = field(default_factory=dict)

    def n_matrix(self) -> np.ndarray:
        out = np.zeros((len(self.routes), self.T), dtype=np.int8)
        for i, t in enumerate(self.wavelength):
            out[i, t] = 1
        return out

    def a_matrix(self, n_spans: int) -> np.ndarray:
        out = np.zeros((n_spans, self.T), dtype=np.int8)
        for t, spans in self.reserved.items():
            for e in spans:
                out[e, t] = 1
        return out


def scap(working: float, spare: float) -> float:
    """Spare capacity as a percentage of shortest-path working capacity."""
    if not working > 0:
        raise ValueError("working capacity must be positive")
    return 100.0 * spare / working


# ---------------------------------------------------------------- heuristic

@lru_cache(maxsize=8192)
def _candidates(graph: NetworkGraph, s: int, d: int, banned: frozenset, limit: float):
    paths = [path_from_nodes(graph, seq) for seq in simple_paths(graph, s, d, banned, limit)]
    paths.sort(key=lambda p: (p.length_km, p.nodes))
    return tuple(paths)


def simple_spp(instance: SppInstance) -> list[RoutedPath]:
    """Sequential minimum-incremental-spare protection routing.

    Demands are taken in instance order. Spare on a span is the largest number
    of protection routes that a single span failure would activate there;
    each demand picks the disjoint route within the length limit whose
    added spare cost is smallest (ties: shorter, then smaller node sequence).
    """
    g = instance.graph
    cost = np.array([g.span(e).cost_km for e in range(g.n_spans)])
    # counts[e, f]: routes over span e whose primary contains span f
    counts = np.zeros((g.n_spans, g.n_spans), dtype=np.int64)
    routes = []
    for idx, (dm, prim) in enumerate(zip(instance.demands, instance.primaries)):
        cands = _candidates(g, dm.source, dm.destination, prim.span_set, float(instance.length_limit))
        if not cands:
            raise InfeasibleError(
                f"demand {dm.index} ({dm.source}->{dm.destination}) has no disjoint protection "
                f"route within {instance.length_limit} km", demand=dm.index)
        spare = counts.max(axis=1)
        pcols = list(prim.spans)
        need = counts[:, pcols].max(axis=1) + 1
        delta = cost * np.maximum(need - spare, 0)
        best = min(cands, key=lambda p: (round(float(delta[list(p.spans)].sum()), 9), p.length_km, p.nodes))
        for e in best.spans:
            counts[e, pcols] += 1
        routes.append(RoutedPath(dm.index, best.nodes, best.spans, best.length_km))
    return routes


def heuristic_spare(instance: SppInstance, routes) -> float:
    """Spare cost of ``routes`` without wavelength continuity (pure sharing)."""
    g = instance.graph
    total = 0.0
    for e in range(g.n_spans):
        per_failure: dict[int, int] = {}
        for prim, r in zip(instance.primaries, routes):
            if e in r.span_set:
                for f in prim.spans:
                    per_failure[f] = per_failure.get(f, 0) + 1
        total += g.span(e).cost_km * max(per_failure.values(), default=0)
    return total


# ---------------------------------------------------------------- ILP

def yname(i, e, d):
    return f"y_i{i}_e{e}_{'f' if d == 0 else 'r'}"


def nname(i, t):
    return f"n_i{i}_t{t}"


def aname(e, t):
    return f"a_e{e}_t{t}"


def kname(i, j):
    return f"k_i{i}_j{j}"


def _route_spans(routes):
    return [r.span_set if isinstance(r, RoutedPath) else frozenset(r) for r in routes]


def _add_common(model, instance, T, usage, pair_rhs, clique=()):
    """Objective, single wavelength, reservation, k-checks and pair rules.

    ``usage(i, e)`` returns the span-usage expression of i on e as a coefficient
    dict, or an int constant when routes are fixed. ``pair_rhs(i, j)`` is the
    extra slack in the same-wavelength rule. Members of ``clique`` must all
    differ, and since wavelengths are interchangeable the j-th member is pinned
    to wavelength j; this removes symmetric copies without changing the optimum.
    """
    g, N = instance.graph, instance.size
    model.set_objective({aname(e, t): g.span(e).cost_km for t in range(T) for e in range(g.n_spans)})
    for i in range(N):
        model.add_constraint({nname(i, t): 1 for t in range(T)}, "=", 1, f"one_wl_i{i}")
    for t, i in enumerate(clique[:T]):
        model.add_constraint({nname(i, t): 1}, "=", 1, f"sym_i{i}")
    for i in range(N):
        for e in range(g.n_spans):
            u = usage(i, e)
            if isinstance(u, int) and u == 0:
                continue
            for t in range(T):
                if isinstance(u, int):
                    model.add_constraint({nname(i, t): 1, aname(e, t): -1}, "<=", 1 - u, f"resv_i{i}_e{e}_t{t}")
                else:
                    model.add_constraint({nname(i, t): 1, **u, aname(e, t): -1}, "<=", 1, f"resv_i{i}_e{e}_t{t}")
    for i in range(N):
        for j in range(i + 1, N):
            for e in range(g.n_spans):
                ui, uj = usage(i, e), usage(j, e)
                if isinstance(ui, int) and isinstance(uj, int):
                    if ui + uj == 2:
                        model.add_constraint({kname(i, j): 1}, "<=", 0, f"kchk_i{i}_j{j}_e{e}")
                    continue
                coefs = {kname(i, j): 1}
                rhs = 2
                for u in (ui, uj):
                    if isinstance(u, int):
                        rhs -= u
                    else:
                        coefs.update(u)
                model.add_constraint(coefs, "<=", rhs, f"kchk_i{i}_j{j}_e{e}")
            for t in range(T):
                coefs, rhs = pair_rhs(i, j)
                model.add_constraint({nname(i, t): 1, nname(j, t): 1, **coefs}, "<=", rhs, f"pair_i{i}_j{j}_t{t}")


def build_spp_ilp(instance: SppInstance, T: int | None = None, fixed_routes=None) -> milp.IlpModel:
    """Wavelength-continuity SPP model.

    With ``fixed_routes`` the protection spans become constants: flow
    conservation is dropped and rows made vacuous by the substitution are
    omitted.
    """
    T = T or instance.T
    if T is None:
        raise ValueError("wavelength bound T required")
    g, N = instance.graph, instance.size
    model = milp.IlpModel(name="spp")
    x = [p.span_set for p in instance.primaries]
    fixed = _route_spans(fixed_routes) if fixed_routes is not None else None
    if fixed is None:
        for i in range(N):
            for e in range(g.n_spans):
                model.add_var(yname(i, e, 0))
                model.add_var(yname(i, e, 1))
    for i in range(N):
        for t in range(T):
            model.add_var(nname(i, t))
    for e in range(g.n_spans):
        for t in range(T):
            model.add_var(aname(e, t))
    for i in range(N):
        for j in range(i + 1, N):
            model.add_var(kname(i, j))

    if fixed is None:
        def usage(i, e):
            return {yname(i, e, 0): 1, yname(i, e, 1): 1}
    else:
        for i in range(N):
            clash = fixed[i] & x[i]
            if clash:
                raise ValueError(f"protection of connection {i} shares spans {sorted(clash)} with its primary")

        def usage(i, e):
            return int(e in fixed[i])

    if fixed is None:
        views = link_views(g)
        for i, dm in enumerate(instance.demands):
            for v in range(g.n_nodes):
                coefs = {yname(i, l.span, l.direction): 1 for l in views.incoming[v]}
                for l in views.outgoing[v]:
                    coefs[yname(i, l.span, l.direction)] = coefs.get(yname(i, l.span, l.direction), 0) - 1
                rhs = -1 if v == dm.source else 1 if v == dm.destination else 0
                model.add_constraint(coefs, "=", rhs, f"flow_i{i}_v{v}")

    m = instance.m
    clique = max_clique(conflict_matrix(instance, fixed_routes)) if fixed is not None else []
    _add_common(model, instance, T, usage, lambda i, j: ({kname(i, j): -1}, 1 + int(m[i, j])), clique)

    if fixed is None:
        for i in range(N):
            for e in range(g.n_spans):
                model.add_constraint(usage(i, e), "<=", 1 - int(e in x[i]), f"disj_i{i}_e{e}")
        if math.isfinite(instance.length_limit):
            for i in range(N):
                coefs = {}
                for e in range(g.n_spans):
                    coefs[yname(i, e, 0)] = coefs[yname(i, e, 1)] = g.span(e).cost_km
                model.add_constraint(coefs, "<=", instance.length_limit, f"len_i{i}")
    return model


def conflict_matrix(instance: SppInstance, routes) -> np.ndarray:
    """Pairs that may not share a wavelength: primaries and protections both overlap."""
    k = pairwise_disjointness(_route_spans(routes))
    conflict = ((instance.m == 0) & (k == 0)).astype(np.int8)
    np.fill_diagonal(conflict, 0)
    return conflict


def _extract_path(graph, assignment, i, s, d) -> RoutedPath:
    out: dict[int, list[int]] = {}
    for e in range(graph.n_spans):
        sp = graph.span(e)
        if assignment[yname(i, e, 0)]:
            out.setdefault(sp.u, []).append(sp.v)
        if assignment[yname(i, e, 1)]:
            out.setdefault(sp.v, []).append(sp.u)
    for v in out:
        out[v].sort()
    walk = [s]
    while walk[-1] != d:
        nxt = out.get(walk[-1])
        if not nxt:
            raise RuntimeError(f"broken protection flow for connection {i}")
        walk.append(nxt.pop(0))
    # cut loops so the route is a simple path
    simple: list[int] = []
    for v in walk:
        if v in simple:
            del simple[simple.index(v) + 1:]
        else:
            simple.append(v)
    return path_from_nodes(graph, simple)


def _min_T_free(instance, method, time_budget) -> int:
    lo, hi = 1, instance.size
    probe = _solve_at
    if probe(instance, None, hi, method, time_budget) is None:
        raise InfeasibleError("no feasible protection routing even with one wavelength per connection")
    while lo < hi:
        mid = (lo + hi) // 2
        if probe(instance, None, mid, method, time_budget) is not None:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _solve_at(instance, fixed_routes, T, method, time_budget):
    model = build_spp_ilp(instance, T, fixed_routes)
    sol = milp.solve(model, time_budget, method)
    if sol.status == "infeasible" or not sol.assignment:
        return None
    g, N = instance.graph, instance.size
    if fixed_routes is None:
        routes = [_extract_path(g, sol.assignment, i, dm.source, dm.destination)
                  for i, dm in enumerate(instance.demands)]
    else:
        routes = list(fixed_routes)
    routes = [RoutedPath(dm.index, r.nodes, r.spans, r.length_km) for dm, r in zip(instance.demands, routes)]
    wavelength = [next(t for t in range(T) if sol.assignment[nname(i, t)]) for i in range(N)]
    reserved = {t: frozenset().union(*[r.span_set for r, w in zip(routes, wavelength) if w == t])
                for t in range(T)}
    k = np.zeros((N, N), dtype=np.int8)
    for i in range(N):
        for j in range(i + 1, N):
            k[i, j] = k[j, i] = sol.assignment[kname(i, j)]
    spare = sum(g.span(e).cost_km for spans in reserved.values() for e in spans)
    if sol.status == "optimal" and not math.isclose(spare, sol.objective_value, rel_tol=1e-9, abs_tol=1e-6):
        raise RuntimeError("reservation map disagrees with the ILP objective")
    return SppSolution(routes, wavelength, reserved, k, spare, T, sol.status, sol.nodes_explored, sol.gap)


def solve_spp(instance: SppInstance, fixed_routes=None, T: int | None = None,
              method: str = "bnb", time_budget: float = 60.0) -> SppSolution:
    """Solve the wavelength-continuity SPP ILP.

    ``T`` defaults to the instance's bound, else the smallest feasible one.
    Raises InfeasibleError (with ``minimum``) when the bound is too small.
    """
    T = T or instance.T
    if fixed_routes is not None:
        conflict = conflict_matrix(instance, fixed_routes)
        tmin = min_colors(conflict)
        if T is None:
            T = tmin
        elif not is_colorable(conflict, T):
            raise InfeasibleError(f"T={T} is infeasible; smallest feasible T is {tmin}", minimum=tmin)
    elif T is None:
        T = _min_T_free(instance, method, time_budget)
    sol = _solve_at(instance, fixed_routes, T, method, time_budget)
    if sol is None:
        if fixed_routes is None:
            raise InfeasibleError(f"T={T} is infeasible", minimum=_min_T_free(instance, method, time_budget))
        raise RuntimeError("solver could not find a feasible assignment within the time budget")
    return sol



def check_spp_solution(instance: SppInstance, sol: SppSolution) -> list[str]:
    """Substitute a solution into the SPP constraints; return violation messages."""
    errors = []
    g = instance.graph
    for i, (dm, r) in enumerate(zip(instance.demands, sol.routes)):
        if r.nodes[0] != dm.source or r.nodes[-1] != dm.destination:
            errors.append(f"flow: route {i} does not join its end nodes")
        if r.span_set & instance.primaries[i].span_set:
            errors.append(f"disjointness: route {i} overlaps its primary")
        if not 0 <= sol.wavelength[i] < sol.T:
            errors.append(f"wavelength: connection {i} out of range")
        for e in r.spans:
            if e not in sol.reserved.get(sol.wavelength[i], ()):
                errors.append(f"reservation: span {e} not reserved for connection {i}")
    N = instance.size
    for i in range(N):
        for j in range(i + 1, N):
            overlap = sol.routes[i].span_set & sol.routes[j].span_set
            if sol.k[i, j] and overlap:
                errors.append(f"k-check: k({i},{j})=1 but protections share {sorted(overlap)}")
            if sol.wavelength[i] == sol.wavelength[j] and not (instance.m[i, j] or sol.k[i, j]):
                errors.append(f"sharing: {i} and {j} share a wavelength with overlapping primaries and protections")
    spare = sum(g.span(e).cost_km for spans in sol.reserved.values() for e in spans)
    if not math.isclose(spare, sol.spare_cost, rel_tol=1e-9, abs_tol=1e-9):
        errors.append("objective: spare cost does not match the reservation map")
    return errors
