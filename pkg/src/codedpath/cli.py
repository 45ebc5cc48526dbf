"""Command-line entry point: ``plan``, ``simulate`` and ``export-lp``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import milp
from .bench import Scenario, emit, run


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", default="cost239", help="topology file, or cost239 / nsfnet")
    p.add_argument("--traffic", default="uniform", help="uniform, gravity, or a demand file")
    p.add_argument("--gravity-count", type=int, default=150)
    p.add_argument("--length-limit", type=float, default=None, help="protection length limit in km")
    p.add_argument("--partition-size", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--wavelengths", type=int, default=None, help="T; default is the smallest feasible")
    p.add_argument("--groups", type=int, default=None, help="C; default equals T")
    p.add_argument("--method", choices=("highs", "bnb"), default="highs")
    p.add_argument("--time-budget", type=float, default=60.0)


def _scenario(ns, **extra) -> Scenario:
    return Scenario(
        topology=ns.topology, traffic=ns.traffic, gravity_count=ns.gravity_count,
        T=ns.wavelengths, C=ns.groups, length_limit=ns.length_limit,
        partition_size=ns.partition_size, seed=ns.seed, method=ns.method,
        time_budget=ns.time_budget, **extra,
    )


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_plan(ns) -> int:
    sc = _scenario(
        ns, network=ns.network, repeats=ns.repeats, x_values=ns.oxc_times, F=ns.failure_detect,
        M=ns.node_proc, propagation_speed=ns.prop_speed, workers=ns.workers, sim_check=ns.sim_check,
    )
    _write(emit(run(sc), ns.format), ns.out)
    return 0


def cmd_export_lp(ns) -> int:
    from .cpp import CppInstance, build_cpp_ilp
    from .coloring import min_colors
    from .demand import partition
    from .spp import SppInstance, build_spp_ilp, simple_spp

    sc = _scenario(ns, repeats=1)
    graph = sc.graph()
    group = partition(sc.demands(graph), sc.partition_size, sc.seed + ns.repeat).groups[ns.group]
    inst = SppInstance.build(graph, group, length_limit=sc.limit())
    routes = simple_spp(inst)
    ci = CppInstance.from_spp(inst, routes)
    bound = sc.C or sc.T or min_colors(ci.conflict())
    if ns.stage == "spp":
        model = build_spp_ilp(inst, sc.T or bound, fixed_routes=None if ns.free_routing else routes)
    else:
        model = build_cpp_ilp(ci, bound)
    _write(milp.export_lp(model), ns.out)
    return 0


def cmd_simulate(ns) -> int:
    from .bench import run_scenario_file

    _write(run_scenario_file(Path(ns.scenario).read_text(encoding="utf-8"), base=Path(ns.scenario).parent), ns.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codedpath", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run the SPP/CPP comparison and print the table")
    _scenario_args(p)
    p.add_argument("--network", choices=("opaque", "transparent"), default="opaque")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--oxc-times", type=_floats, default=(0.5, 1.0, 5.0, 10.0), help="X values in ms")
    p.add_argument("--failure-detect", type=float, default=10.0, help="F in ms")
    p.add_argument("--node-proc", type=float, default=None, help="M in ms")
    p.add_argument("--prop-speed", type=float, default=0.005, help="ms per km")
    p.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--sim-check", action="store_true", help="simulate one failure per linear coding trail")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="simulate one coding trail from a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-lp", help="write one partition group's ILP in LP format")
    _scenario_args(p)
    p.add_argument("--stage", choices=("spp", "cpp"), required=True)
    p.add_argument("--group", type=int, default=0, help="partition group index")
    p.add_argument("--repeat", type=int, default=0)
    p.add_argument("--free-routing", action="store_true", help="let the SPP model route protection paths")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_lp)
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"codedpath: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
