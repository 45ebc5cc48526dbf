import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codedpath import milp
from codedpath.demand import make_demands
from codedpath.routing import RoutingError, path_from_nodes
from codedpath.spp import (
    InfeasibleError, SppInstance, build_spp_ilp, check_spp_solution, conflict_matrix, heuristic_spare,
    scap, simple_spp, solve_spp,
)
from oracles import best_spp, random_spp_instance, recheck_spp, square, triangle


def _tri():
    return SppInstance.build(triangle(), make_demands([(0, 1)]))


def test_triangle_simple_spp():
    assert simple_spp(_tri())[0].nodes == (0, 2, 1)


def test_triangle_ilp_optimum():
    sol = milp.solve(build_spp_ilp(_tri(), 1))
    assert sol.status == "optimal" and sol.objective_value == 2


@pytest.mark.parametrize("fixed", [False, True])
def test_triangle_solve(fixed):
    inst = _tri()
    sol = solve_spp(inst, simple_spp(inst) if fixed else None)
    assert sol.spare_cost == 2 and sol.T == 1 and sol.routes[0].nodes == (0, 2, 1)
    assert scap(inst.working_km, sol.spare_cost) == 200.0


def test_length_limit_zero_rejected():
    inst = SppInstance.build(triangle(), make_demands([(0, 1)]), length_limit=0)
    with pytest.raises(InfeasibleError) as err:
        simple_spp(inst)
    assert err.value.demand == 0
    with pytest.raises(InfeasibleError):
        solve_spp(inst)


def test_square_two_demands_sharing_table():
    # 0-2 and 1-3 on a unit ring: primaries 0-1-2 and 1-0-3 share span 0-1
    inst = SppInstance.build(square(), make_demands([(0, 2), (1, 3)]))
    assert [p.nodes for p in inst.primaries] == [(0, 1, 2), (1, 0, 3)]
    assert inst.m[0, 1] == 0
    routes = simple_spp(inst)
    assert [r.nodes for r in routes] == [(0, 3, 2), (1, 2, 3)]
    # protections share span 2-3 and primaries overlap, so one wavelength each
    sol = solve_spp(inst, routes)
    assert sol.T == 2 and sol.spare_cost == 4
    assert best_spp(inst, 2, routes) == 4
    free = solve_spp(inst, T=2, method="highs")
    assert free.spare_cost == best_spp(inst, 2) == 4


def test_disjoint_primaries_share_on_one_wavelength():
    inst = SppInstance.build(square(), make_demands([(0, 1), (2, 3)]))
    assert inst.m[0, 1] == 1
    sol = solve_spp(inst, T=1)
    assert sol.T == 1 and sol.spare_cost == best_spp(inst, 1) == 4
    assert not recheck_spp(inst, sol)


def test_T_too_small_reports_minimum():
    inst = SppInstance.build(square(), make_demands([(0, 2), (1, 3)]))
    with pytest.raises(InfeasibleError) as err:
        solve_spp(inst, simple_spp(inst), T=1)
    assert err.value.minimum == 2
    with pytest.raises(InfeasibleError) as err:
        solve_spp(inst, T=1)
    assert err.value.minimum == 2


def test_fixed_route_clash_rejected():
    inst = _tri()
    with pytest.raises(ValueError):
        build_spp_ilp(inst, 1, [inst.primaries[0]])


def test_scap_examples():
    assert scap(100, 81.8) == pytest.approx(81.8)
    assert scap(100, 0) == 0
    assert scap(50, 25) == 50
    with pytest.raises(ValueError):
        scap(0, 1)


def test_instance_validation():
    inst = _tri()
    with pytest.raises(ValueError):
        SppInstance(inst.graph, inst.demands, [], inst.m)
    with pytest.raises(ValueError):
        SppInstance(inst.graph, inst.demands, inst.primaries, inst.m, T=0)


def test_heuristic_spare_bounds_ilp():
    rng = np.random.default_rng(3)
    for _ in range(10):
        inst = random_spp_instance(rng, 7, 5)
        routes = simple_spp(inst)
        sol = solve_spp(inst, routes, method="highs")
        # wavelength continuity can only cost more than unconstrained sharing
        assert sol.spare_cost >= heuristic_spare(inst, routes) - 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fixed_route_solution_optimal_and_valid(seed):
    inst = random_spp_instance(np.random.default_rng(seed), 7, 4)
    routes = simple_spp(inst)
    sol = solve_spp(inst, routes)
    assert not recheck_spp(inst, sol)
    assert not check_spp_solution(inst, sol)
    assert sol.spare_cost == pytest.approx(best_spp(inst, sol.T, routes))
    conflict = conflict_matrix(inst, routes)
    for i in range(inst.size):
        for j in range(inst.size):
            if conflict[i, j]:
                assert sol.wavelength[i] != sol.wavelength[j]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_free_routing_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    inst = random_spp_instance(rng, 6, 3, limit=12)
    try:
        sol = solve_spp(inst, method="highs")
    except InfeasibleError:
        assert best_spp(inst, inst.size) == math.inf
        return
    assert not recheck_spp(inst, sol)
    assert all(r.length_km <= 12 for r in sol.routes)
    assert sol.spare_cost == pytest.approx(best_spp(inst, sol.T))
