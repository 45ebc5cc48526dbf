"""
Restoration time against cross-connect time
===========================================

Worst-case restoration for one planned COST 239 run, and how each scheme
reacts when the optical cross-connect gets slower.
"""

from codedpath.bench import Scenario, emit, run
from codedpath.timing import RtInputs, TimingParams, rt_cpp, rt_spp

# a single connection: 2000 km primary, 4-hop protection, cut at the source
inp = RtInputs(d_sd=10.0, h_b=4, h_is=0, S=2.0)
for X in (0.5, 1, 5, 10):
    p = TimingParams(X=X)
    print(f"X={X:>4}  CPP {rt_cpp(inp, p):6.2f}  SPP1 {rt_spp(inp, p, 1):6.2f}  SPP2 {rt_spp(inp, p, 2):6.2f}")

# the same comparison over a whole planned network, one repeat only
report = run(Scenario(topology="cost239", repeats=1))
print()
print(emit(report), end="")
