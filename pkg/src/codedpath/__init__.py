"""Spare-capacity planning for shared and coded path protection in optical meshes."""
from .topology import NetworkGraph, builtin_topology, load_topology
from .demand import Demand, generate_gravity, generate_uniform, partition
from .routing import RoutedPath, pairwise_disjointness, shortest_path
from .milp import IlpModel, IlpSolution, export_lp, solve
from .spp import SppInstance, SppSolution, scap, simple_spp, solve_spp
from .cpp import CodingGroup, CppInstance, convert, extract_trails
from .timing import TimingParams, buffering_delays, rt_cpp, rt_spp, worst_case_rt
from .trailsim import FailureEvent, measure_recovery, simulate
from .bench import Scenario, emit, run

__version__ = "0.1.0"
