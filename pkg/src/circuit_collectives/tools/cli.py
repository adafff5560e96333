"""
Command-line entry point.

    python -m src.circuit_collectives.tools <subcommand> [options]

Exit codes: 0 on success, 2 on usage errors (bad flags, invalid parameters, unsupported
requests), 1 on runtime errors.
"""

import argparse
from collections.abc import Callable, Sequence
import json
from pathlib import Path
import re
import sys
from typing import Any

from src.circuit_collectives.config.error_constants import EXIT_SUCCESS
from src.circuit_collectives.config.logging_config import (
    get_logger,
    log_function_call,
    setup_logging,
)
from src.circuit_collectives.config.settings import SimulationSettings, load_settings
from src.circuit_collectives.config.sim_constants import (
    AUTO_ALGORITHM,
    BACKEND_RECONFIGURING,
    BASELINE_ALGORITHMS,
    BASELINE_TOPOLOGIES,
    BENCHMARK_RANKS,
    BUFFER_SWEEP_BYTES,
    ENDTOEND_RANKS,
    GB,
    GIB,
    KIB,
    MIB,
)
from src.circuit_collectives.error_management.error_manager import ErrorManager
from src.circuit_collectives.error_management.exceptions import ValidationError
from src.circuit_collectives.error_management.validator import Validator
from src.circuit_collectives.tools.collectives import (
    Algorithm,
    Primitive,
    build_schedule,
    schedule_from_dict,
    schedule_to_dict,
    split_rounds,
)
from src.circuit_collectives.tools.experiments import (
    ScenarioSpec,
    benchmark_grid,
    cost_rows,
    make_backend,
    plan_meta,
    plan_rows,
    plan_scenario,
    prepare_graph,
    run_endtoend,
    run_grid,
    simulation_rows,
)
from src.circuit_collectives.tools.fiber_planner import (
    ServerGraph,
    plan_fibers,
    plan_to_dict,
    verify_plan,
)
from src.circuit_collectives.tools.fiber_planner import random_requests as random_fiber_requests
from src.circuit_collectives.tools.mesh_router import (
    MeshGraph,
    request_from_dict,
    route_all,
    validate_routes,
)
from src.circuit_collectives.tools.mesh_router import random_requests as random_mesh_requests
from src.circuit_collectives.tools.report_io import (
    FORMAT_CSV,
    FORMAT_JSON,
    Report,
    emit,
    read_json,
    render,
)
from src.circuit_collectives.tools.taskgraph_sim import (
    TaskGraph,
    graph_from_dict,
    graph_to_dict,
    simulate,
)
from src.circuit_collectives.tools.topology import (
    LATTICE_KINDS,
    Topology,
    make_default_topology,
    make_topology,
    topology_to_dict,
)
from src.circuit_collectives.tools.transformer_fixture import build_transformer_graph

logger = get_logger("tools.cli")

_UNITS = {"": 1, "B": 1, "KIB": KIB, "MIB": MIB, "GIB": GIB, "KB": 10**3, "MB": 10**6, "GB": GB}
_SIZE_PATTERN = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([A-Za-z]*)\s*$")


def parse_bytes(text: str) -> int:
    """Parse a buffer size such as 4096, 256MiB or 1GB."""
    match = _SIZE_PATTERN.match(text)
    unit = match.group(2).upper() if match else ""
    if match is None or unit not in _UNITS:
        raise argparse.ArgumentTypeError(f"invalid size: {text!r}")
    return int(float(match.group(1)) * _UNITS[unit])


def parse_list(item: Callable[[str], Any]) -> Callable[[str], list[Any]]:
    """Comma-separated values of one type."""

    def parse(text: str) -> list[Any]:
        return [item(part) for part in text.split(",") if part.strip()]

    return parse


def parse_pair(text: str) -> tuple[int, int]:
    """WxH or RxC."""
    parts = text.lower().split("x")
    if len(parts) != 2 or not all(part.strip().isdigit() for part in parts):
        raise argparse.ArgumentTypeError(f"expected two sizes like 8x8, got {text!r}")
    return int(parts[0]), int(parts[1])


def _write(args: argparse.Namespace, text: str) -> None:
    if args.output:
        with Path(args.output).open("w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _write_report(args: argparse.Namespace, report: Report) -> None:
    if args.output:
        emit(report, args.format, args.output)
    else:
        sys.stdout.write(render(report, args.format))


def _write_document(args: argparse.Namespace, document: dict[str, Any]) -> None:
    _write(args, json.dumps(document, indent=2) + "\n")


def _settings(args: argparse.Namespace) -> SimulationSettings:
    overrides = {
        "alpha_s": args.alpha,
        "beta_s_per_byte": args.beta,
        "reconf_delay_s": args.reconf_delay,
        "seed": args.seed,
        "workers": args.workers,
    }
    return load_settings(args.config, overrides)


def _topology(args: argparse.Namespace) -> Topology:
    if args.dims:
        return make_topology(args.topology, args.dims)
    return make_default_topology(args.topology, args.ranks)


def _load_graph(args: argparse.Namespace) -> TaskGraph:
    if args.graph:
        return graph_from_dict(read_json(args.graph))
    return build_transformer_graph(args.ranks)


def cmd_gen_topology(args: argparse.Namespace, settings: SimulationSettings) -> None:
    _write_document(args, topology_to_dict(_topology(args)))


def cmd_gen_schedule(args: argparse.Namespace, settings: SimulationSettings) -> None:
    schedule = build_schedule(
        args.algorithm, args.primitive, args.bytes, args.ranks, dims=args.dims or None
    )
    if args.split:
        schedule = split_rounds(schedule, settings.tx_per_gpu, settings.rx_per_gpu)
    _write_document(args, schedule_to_dict(schedule))


def cmd_cost(args: argparse.Namespace, settings: SimulationSettings) -> None:
    t = _topology(args)
    if args.schedule:
        schedule = schedule_from_dict(read_json(args.schedule))
    else:
        dims = t.dims if t.kind in LATTICE_KINDS else None
        schedule = build_schedule(args.algorithm, args.primitive, args.bytes, t.n, dims=dims)
    rows = cost_rows(t, schedule, settings.cost_params())
    total = sum(row["time_s"] for row in rows)
    _write_report(args, Report("cost_breakdown", tuple(rows), meta={"total_s": total}))


def cmd_plan(args: argparse.Namespace, settings: SimulationSettings) -> None:
    t = _topology(args)
    spec = ScenarioSpec(
        topology=args.topology,
        n_ranks=t.n,
        algorithm=args.algorithm,
        primitive=args.primitive,
        buffer_bytes=(args.bytes,),
        backend=BACKEND_RECONFIGURING,
        dims=t.dims,
        settings=settings,
    )
    result = plan_scenario(spec, t, args.bytes, settings.cost_params())
    _write_report(args, Report("plan", tuple(plan_rows(result)), meta=plan_meta(result)))


def cmd_route_mesh(args: argparse.Namespace, settings: SimulationSettings) -> None:
    width, height = args.mesh
    mesh = MeshGraph(width, height, directed=settings.mesh_directed_waveguides)
    if args.requests:
        data = Validator.validate_sequence(read_json(args.requests), "requests")
        requests = [request_from_dict(item) for item in data]
    else:
        requests = random_mesh_requests(
            width, height, args.random, args.wavelengths, settings.seed
        )
    max_overlap = args.max_overlap or settings.mesh_max_overlap
    routing = route_all(
        mesh,
        requests,
        max_overlap=max_overlap,
        penalize_factor=args.penalize or settings.mesh_penalize_factor,
        trials=args.trials or settings.mesh_trials,
        search=args.search,
    )
    rows = [
        {
            "request": index,
            "src": list(route.request.src),
            "dst": list(route.request.dst),
            "wavelength": route.request.wavelength,
            "valid": route.valid,
            "trials": route.trials_used,
            "path": [list(node) for node in route.path],
        }
        for index, route in enumerate(routing.routes)
    ]
    meta = {
        "mesh": [width, height],
        "routed_fraction": routing.routed_fraction,
        "unrouted": len(routing.unrouted),
        "valid": validate_routes(mesh, routing.routes, max_overlap),
        "directed_waveguides": mesh.directed,
    }
    _write_report(args, Report("routes", tuple(rows), meta=meta))


def cmd_plan_fibers(args: argparse.Namespace, settings: SimulationSettings) -> None:
    rows_count, cols_count = args.grid
    g = ServerGraph.grid(rows_count, cols_count)
    if args.requests:
        data = Validator.validate_sequence(read_json(args.requests), "requests")
        requests = [
            tuple(Validator.validate_sequence(item, f"requests[{i}]", min_length=2)[:2])
            for i, item in enumerate(data)
        ]
    else:
        requests = random_fiber_requests(rows_count * cols_count, args.random, settings.seed)
    pairs = [(int(src), int(dst)) for src, dst in requests]
    plan = plan_fibers(g, pairs, seed=settings.seed)
    rows = [
        {
            "request": index,
            "src": src,
            "dst": dst,
            "hops": len(path) - 1,
            "path": list(path),
        }
        for index, ((src, dst), path) in enumerate(zip(pairs, plan.paths, strict=True))
    ]
    meta = {key: value for key, value in plan_to_dict(plan).items() if key != "paths"}
    meta["verified"] = verify_plan(g, pairs, plan)
    _write_report(args, Report("fibers", tuple(rows), meta=meta))


def cmd_simulate(args: argparse.Namespace, settings: SimulationSettings) -> None:
    raw = _load_graph(args)
    if args.write_graph:
        with Path(args.write_graph).open("w", encoding="utf-8") as handle:
            handle.write(json.dumps(graph_to_dict(raw), indent=2) + "\n")
    g = prepare_graph(raw, args.epsilon)
    t0 = _topology(args)
    backend = make_backend(args.backend, settings, t0.n)
    report = simulate(g, backend, t0, settings.cost_params())
    meta = {
        "backend": report.backend,
        "topology": args.topology,
        "makespan_s": report.makespan_s,
        "throughput": report.throughput,
        "n_reconfigs": report.n_reconfigs,
        "warnings": list(g.warnings),
    }
    _write_report(args, Report("simulation", tuple(simulation_rows(g, report)), meta=meta))


def cmd_benchmark(args: argparse.Namespace, settings: SimulationSettings) -> None:
    specs = benchmark_grid(
        args.primitive,
        args.ranks,
        args.buffers,
        topologies=args.topologies,
        algorithms=args.algorithms,
        reconf_delays=args.reconf_delays or (),
        settings=settings,
    )
    rows = run_grid(specs, settings.workers)
    _write_report(args, Report("benchmark", tuple(rows), meta={"settings": settings.to_dict()}))


def cmd_endtoend(args: argparse.Namespace, settings: SimulationSettings) -> None:
    if args.graph:
        loaded = graph_from_dict(read_json(args.graph))
        if len(args.ranks) != 1 or (loaded.n_ranks and args.ranks[0] != loaded.n_ranks):
            raise ValidationError(
                f"--graph addresses {loaded.n_ranks} ranks; pass that single count with --ranks",
                field="ranks",
                value=args.ranks,
                context={"validation_type": "graph_ranks", "graph_ranks": loaded.n_ranks},
            )

        def graph_for(_n: int) -> TaskGraph:
            return loaded

    else:
        graph_for = build_transformer_graph
    rows = run_endtoend(
        graph_for,
        topologies=args.topologies,
        rank_counts=args.ranks,
        backends=args.backends,
        settings=settings,
    )
    _write_report(args, Report("endtoend", tuple(rows), meta={"settings": settings.to_dict()}))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML settings file (default: $PCCL_SIM_CONFIG)")
    parser.add_argument("-o", "--output", help="output file (default: stdout)")
    parser.add_argument("--format", choices=[FORMAT_JSON, FORMAT_CSV], default=FORMAT_JSON)
    parser.add_argument("--alpha", type=float, help="seconds per transfer (default 3e-6)")
    parser.add_argument("--beta", type=float, help="seconds per byte (default 1/450e9)")
    parser.add_argument(
        "--reconf-delay", type=float, help="reconfiguration delay in seconds (default 5e-6)"
    )
    parser.add_argument("--seed", type=int, help="random seed (default 0)")
    parser.add_argument("--workers", type=int, help="worker processes, 0 = physical cores")


def _add_topology(parser: argparse.ArgumentParser, ranks_default: int | None) -> None:
    parser.add_argument(
        "--topology", choices=[kind.value for kind in LATTICE_KINDS], default="ring"
    )
    parser.add_argument(
        "--ranks",
        type=int,
        default=ranks_default,
        required=ranks_default is None,
        help="rank count; dims default to a near-equal factorization",
    )
    parser.add_argument(
        "--dims", type=parse_list(int), default=None, help="explicit dims, e.g. 4,4,8"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circuit-collectives",
        description="Collective communication on reconfigurable photonic fabrics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    primitives = [p.value for p in Primitive]

    p = sub.add_parser("gen-topology", help="emit a generated topology as JSON")
    _add_topology(p, BENCHMARK_RANKS)
    p.set_defaults(handler=cmd_gen_topology)

    p = sub.add_parser("gen-schedule", help="emit a collective schedule as JSON")
    p.add_argument("--algorithm", choices=[a.value for a in Algorithm], required=True)
    p.add_argument("--primitive", choices=primitives, required=True)
    p.add_argument("--bytes", type=parse_bytes, required=True, help="buffer size per rank")
    p.add_argument("--ranks", type=int, default=BENCHMARK_RANKS)
    p.add_argument("--dims", type=parse_list(int), default=None, help="bucket layout")
    p.add_argument("--split", action="store_true", help="apply the Tx/Rx round split")
    p.set_defaults(handler=cmd_gen_schedule)

    p = sub.add_parser("cost", help="per-round cost of a schedule on a fixed topology")
    _add_topology(p, BENCHMARK_RANKS)
    p.add_argument("--schedule", help="schedule JSON (otherwise generated from the flags)")
    p.add_argument("--algorithm", choices=[a.value for a in Algorithm], default="ring")
    p.add_argument("--primitive", choices=primitives, default=Primitive.REDUCE_SCATTER.value)
    p.add_argument("--bytes", type=parse_bytes, default=256 * MIB)
    p.set_defaults(handler=cmd_cost)

    p = sub.add_parser("plan", help="plan topology reconfigurations for one collective")
    _add_topology(p, BENCHMARK_RANKS)
    p.add_argument(
        "--algorithm", choices=[*(a.value for a in Algorithm), AUTO_ALGORITHM], default="auto"
    )
    p.add_argument("--primitive", choices=primitives, default=Primitive.REDUCE_SCATTER.value)
    p.add_argument("--bytes", type=parse_bytes, default=256 * MIB)
    p.set_defaults(handler=cmd_plan)

    p = sub.add_parser("route-mesh", help="route circuits on an MZI mesh")
    p.add_argument("--mesh", type=parse_pair, default=(64, 64), help="WxH (default 64x64)")
    p.add_argument("--requests", help="JSON list of {src, dst, wavelength}")
    p.add_argument("--random", type=int, default=128, help="random requests when no file")
    p.add_argument("--wavelengths", type=int, default=1)
    p.add_argument("--trials", type=int, help="path searches per request (default 16)")
    p.add_argument("--penalize", type=float, help="weight multiplier (default 2.0)")
    p.add_argument("--max-overlap", type=int, help="circuits per waveguide (default 1)")
    p.add_argument("--search", choices=["penalize", "k_shortest"], default="penalize")
    p.set_defaults(handler=cmd_route_mesh)

    p = sub.add_parser("plan-fibers", help="route inter-server circuits minimizing fibers")
    p.add_argument("--grid", type=parse_pair, default=(8, 8), help="RxC servers (default 8x8)")
    p.add_argument("--requests", help="JSON list of [src, dst]")
    p.add_argument("--random", type=int, default=100, help="random requests when no file")
    p.set_defaults(handler=cmd_plan_fibers)

    p = sub.add_parser("simulate", help="simulate one training iteration")
    _add_topology(p, ENDTOEND_RANKS[-1])
    p.add_argument("--graph", help="task-graph JSON (default: transformer fixture)")
    p.add_argument("--write-graph", help="also write the untagged input graph here")
    p.add_argument(
        "--backend",
        choices=[*BASELINE_ALGORITHMS, BACKEND_RECONFIGURING],
        default=BACKEND_RECONFIGURING,
    )
    p.add_argument("--epsilon", type=float, default=0.0, help="coschedule readiness window")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("benchmark", help="baselines vs the reconfiguring planner")
    p.add_argument("--primitive", choices=primitives, default=Primitive.REDUCE_SCATTER.value)
    p.add_argument("--ranks", type=int, default=BENCHMARK_RANKS)
    p.add_argument("--buffers", type=parse_list(parse_bytes), default=list(BUFFER_SWEEP_BYTES))
    p.add_argument("--topologies", type=parse_list(str), default=list(BASELINE_TOPOLOGIES))
    p.add_argument("--algorithms", type=parse_list(str), default=list(BASELINE_ALGORITHMS))
    p.add_argument("--reconf-delays", type=parse_list(float), default=None)
    p.set_defaults(handler=cmd_benchmark)

    p = sub.add_parser("endtoend", help="training throughput per topology and backend")
    p.add_argument("--graph", help="task-graph JSON (default: transformer fixture)")
    p.add_argument("--ranks", type=parse_list(int), default=list(ENDTOEND_RANKS))
    p.add_argument("--topologies", type=parse_list(str), default=list(BASELINE_TOPOLOGIES))
    p.add_argument(
        "--backends",
        type=parse_list(str),
        default=[*BASELINE_ALGORITHMS, BACKEND_RECONFIGURING],
    )
    p.set_defaults(handler=cmd_endtoend)

    for subparser in sub.choices.values():
        _add_common(subparser)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one subcommand and return the exit code."""
    args = build_parser().parse_args(argv)
    setup_logging()
    log_function_call(args.command, **{k: v for k, v in vars(args).items() if k != "handler"})
    error_manager = ErrorManager()
    try:
        settings = _settings(args)
        args.handler(args, settings)
    except Exception as e:
        sys.stderr.write(error_manager.dispatch(e) + "\n")
        return ErrorManager.exit_code_for(e)
    return EXIT_SUCCESS
