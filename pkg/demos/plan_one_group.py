"""
Planning one demand group on COST 239
=====================================

Route primaries, pick shared protection routes, then compare wavelength
sharing against coding groups on the same routes.
"""

from codedpath import builtin_topology, generate_uniform, partition, scap
from codedpath.coloring import min_colors
from codedpath.cpp import CppInstance, convert, format_groups
from codedpath.spp import SppInstance, simple_spp, solve_spp

graph = builtin_topology("cost239")
print(f"{graph.n_nodes} nodes, {graph.n_spans} spans")

# one demand per node pair, shuffled into groups of 20
demands = generate_uniform(graph)
group = partition(demands, max_group_size=20, seed=1).groups[0]

# shortest primaries, protection limited to 4000 km
inst = SppInstance.build(graph, group, length_limit=4000)
routes = simple_spp(inst)
for p, r in list(zip(inst.primaries, routes))[:5]:
    print(f"demand {p.connection}: primary {p.nodes}  protection {r.nodes}")

# the coding rule fixes the bound; wavelength sharing gets the same one
cpp_inst = CppInstance.from_spp(inst, routes)
bound = min_colors(cpp_inst.conflict())
spp = solve_spp(inst, routes, T=bound, method="highs")
cpp, groups = convert(spp, cpp_inst, C=bound, method="highs")

print(f"bound {bound}")
print(f"SPP spare {spp.spare_cost:.0f} km  SCaP {scap(inst.working_km, spp.spare_cost):.1f}%")
print(f"CPP spare {cpp.spare_cost:.0f} km  SCaP {scap(inst.working_km, cpp.spare_cost):.1f}%")
print(format_groups(groups), end="")

kinds = [t.kind for g in groups for t in g.trails]
print({k: kinds.count(k) for k in sorted(set(kinds))})
