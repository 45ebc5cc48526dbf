"""
A coding trail under failure
============================

Three connections share one linear protection trail. Cut one primary and
watch the destination decode the lost stream from the parity.
"""

import numpy as np

from codedpath.timing import TimingParams, buffering_delays
from codedpath.trailsim import FailureEvent, measure_recovery, random_payloads, random_trail, simulate

params = TimingParams()
scenario = random_trail(3, np.random.default_rng(4))
trail, graph = scenario.trail, scenario.graph

print("trail nodes", trail.nodes)
for en in trail.end_nodes:
    print(f"  connection {en.connection} end {en.role} at position {en.position}")

# buffer depths, in ms, that line up the three XOR4 inputs
timing = buffering_delays(trail, graph, params)
for et in timing.ends:
    print(f"  {et.end.connection}{et.end.role}: B2={et.B2:.1f} B3={et.B3:.1f} xor4 {et.xor4}")

# cut the first span of the middle connection's primary at round 30
victim = trail.end_nodes[2].connection
cut = FailureEvent(trail.primary(victim)[0], 30)
traffic = random_payloads(trail.connections, 80, seed=1)
report = simulate(trail, graph, traffic, params=params, failure=cut)

print("every round delivered intact:", report.exact())
print("recovery ticks per connection:", measure_recovery(report))
key = (victim, "T")
print("rounds 28-33 for", key, [report.via[key][g] for g in range(28, 34)])

# the two-tier mode adds a direct copy along the trail once the cut is detected
tiers = simulate(trail, graph, traffic, params=params, failure=cut, mode="two_tier")
print("two-tier recovery:", measure_recovery(tiers))
