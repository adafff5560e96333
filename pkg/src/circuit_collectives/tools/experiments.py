"""
Benchmark sweeps and end-to-end comparisons, flattened into report rows.
"""

from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from itertools import chain
import math
import multiprocessing as mp
from typing import Any

from src.circuit_collectives.config.logging_config import get_logger
from src.circuit_collectives.config.settings import SimulationSettings
from src.circuit_collectives.config.sim_constants import (
    AUTO_ALGORITHM,
    BACKEND_BASELINE,
    BACKEND_RECONFIGURING,
    BASELINE_ALGORITHMS,
    BASELINE_TOPOLOGIES,
    ENDTOEND_RANKS,
)
from src.circuit_collectives.error_management.exceptions import ValidationError
from src.circuit_collectives.error_management.validator import Validator
from src.circuit_collectives.tools.collectives import (
    Algorithm,
    Primitive,
    Schedule,
    build_schedule,
)
from src.circuit_collectives.tools.cost_model import CostParams, schedule_cost
from src.circuit_collectives.tools.reconfig_planner import CollectivePlan, plan_collective
from src.circuit_collectives.tools.taskgraph_sim import (
    CommBackend,
    FixedTopologyBackend,
    IterationReport,
    ReconfiguringBackend,
    TaskGraph,
    coschedule,
    simulate,
    tag_comm_nodes,
)
from src.circuit_collectives.tools.topology import (
    LATTICE_KINDS,
    Topology,
    make_default_topology,
    make_topology,
)
from src.circuit_collectives.tools.transformer_fixture import build_transformer_graph

logger = get_logger("tools.experiments")

Row = dict[str, Any]


@dataclass(frozen=True)
class ScenarioSpec:
    """One benchmark scenario: a topology, an algorithm and backend, and the sweeps to run."""

    topology: str
    n_ranks: int
    algorithm: str
    primitive: str
    buffer_bytes: tuple[int, ...]
    backend: str = BACKEND_BASELINE
    reconf_delays: tuple[float, ...] = ()
    dims: tuple[int, ...] | None = None
    settings: SimulationSettings = field(default_factory=SimulationSettings)

    def __post_init__(self) -> None:
        Validator.validate_choice(self.topology, "topology", list(LATTICE_KINDS))
        Validator.validate_integer(self.n_ranks, "n_ranks", min_value=2)
        Validator.validate_choice(self.primitive, "primitive", list(Primitive))
        Validator.validate_choice(
            self.backend, "backend", [BACKEND_BASELINE, BACKEND_RECONFIGURING]
        )
        algorithms = [*Algorithm, AUTO_ALGORITHM]
        if self.backend == BACKEND_BASELINE:
            algorithms.remove(AUTO_ALGORITHM)
        Validator.validate_choice(self.algorithm, "algorithm", algorithms)
        for i, size in enumerate(Validator.validate_sequence(self.buffer_bytes, "buffer", 1)):
            Validator.validate_number(size, f"buffer[{i}]", min_value=0.0)
        for i, delay in enumerate(self.reconf_delays):
            Validator.validate_number(delay, f"reconf_delay[{i}]", min_value=0.0)
        if self.dims is not None and math.prod(self.dims) != self.n_ranks:
            raise ValidationError(
                f"dims {list(self.dims)} do not multiply to {self.n_ranks} ranks",
                field="dims",
                value=list(self.dims),
                context={"validation_type": "dims_product", "n": self.n_ranks},
            )

    @property
    def key(self) -> tuple[str, int, str, str, str]:
        return (self.topology, self.n_ranks, self.backend, self.algorithm, self.primitive)

    @property
    def delays(self) -> tuple[float, ...]:
        return self.reconf_delays or (self.settings.reconf_delay_s,)

    def base_topology(self) -> Topology:
        if self.dims is not None:
            return make_topology(self.topology, self.dims)
        return make_default_topology(self.topology, self.n_ranks)

    def candidates(self) -> tuple[str, ...]:
        if self.algorithm == AUTO_ALGORITHM:
            return self.settings.planner_candidates
        return (self.algorithm,)


def standard_topologies(settings: SimulationSettings, n: int) -> tuple[Topology, ...]:
    return tuple(make_default_topology(kind, n) for kind in settings.standard_set)


def lattice_dims(t: Topology) -> tuple[int, ...] | None:
    return t.dims if t.kind in LATTICE_KINDS else None


def baseline_schedule(
    t: Topology, algorithm: str, primitive: Primitive, total_bytes: float
) -> Schedule:
    """Schedule a baseline runs; an all-reduce is costed as its reduce-scatter, twice."""
    planned = Primitive.REDUCE_SCATTER if primitive is Primitive.ALL_REDUCE else primitive
    return build_schedule(algorithm, planned, total_bytes, t.n, dims=lattice_dims(t))


def _baseline_row(
    spec: ScenarioSpec, t: Topology, size: float, params: CostParams
) -> Row:
    primitive = Primitive(spec.primitive)
    cost = schedule_cost(t, baseline_schedule(t, spec.algorithm, primitive, size), params)
    repeats = 2 if primitive is Primitive.ALL_REDUCE else 1
    return {
        "algorithm": spec.algorithm,
        "total_s": cost.total_time * repeats,
        "alpha_s": cost.alpha_time * repeats,
        "beta_s": cost.beta_time * repeats,
        "reconf_s": 0.0,
        "n_reconfigs": 0,
    }


def plan_scenario(
    spec: ScenarioSpec, t: Topology, size: float, params: CostParams
) -> CollectivePlan:
    settings = spec.settings
    return plan_collective(
        Primitive(spec.primitive),
        size,
        t,
        params,
        standard_set=standard_topologies(settings, t.n),
        candidates=spec.candidates(),
        tx_per_gpu=settings.tx_per_gpu,
        rx_per_gpu=settings.rx_per_gpu,
    )


def _reconfiguring_row(
    spec: ScenarioSpec, t: Topology, size: float, params: CostParams
) -> Row:
    result = plan_scenario(spec, t, size, params)
    return {
        "algorithm": result.algorithm.value,
        "total_s": result.total_time,
        "alpha_s": result.alpha_time,
        "beta_s": result.beta_time,
        "reconf_s": result.reconf_time,
        "n_reconfigs": result.n_reconfigs,
    }


def run_benchmark(spec: ScenarioSpec) -> list[Row]:
    """
    Cost every (reconfiguration delay, buffer) point of a scenario.

    Returns:
        benchmark rows in sweep order
    """
    t = spec.base_topology()
    base_params = spec.settings.cost_params()
    rows: list[Row] = []
    for delay in spec.delays:
        params = base_params.with_reconf_delay(delay)
        for size in spec.buffer_bytes:
            if spec.backend == BACKEND_BASELINE:
                values = _baseline_row(spec, t, size, params)
            else:
                values = _reconfiguring_row(spec, t, size, params)
            rows.append(
                {
                    "topology": spec.topology,
                    "dims": list(t.dims),
                    "backend": spec.backend,
                    "primitive": spec.primitive,
                    "n_ranks": spec.n_ranks,
                    "buffer_bytes": size,
                    "reconf_delay_s": delay,
                    **values,
                }
            )
    logger.debug("Scenario finished", extra={"scenario": list(spec.key), "rows": len(rows)})
    return rows


def benchmark_grid(
    primitive: str,
    n_ranks: int,
    buffer_bytes: Sequence[int],
    topologies: Sequence[str] = BASELINE_TOPOLOGIES,
    algorithms: Sequence[str] = BASELINE_ALGORITHMS,
    reconf_delays: Sequence[float] = (),
    settings: SimulationSettings | None = None,
) -> list[ScenarioSpec]:
    """Every baseline algorithm on every topology, plus the reconfiguring backend on each."""
    settings = settings or SimulationSettings()
    specs: list[ScenarioSpec] = []
    for topology in topologies:
        baselines = (Algorithm.DEX.value,) if primitive == Primitive.ALL_TO_ALL else algorithms
        for algorithm in baselines:
            specs.append(
                ScenarioSpec(
                    topology=topology,
                    n_ranks=n_ranks,
                    algorithm=algorithm,
                    primitive=primitive,
                    buffer_bytes=tuple(buffer_bytes),
                    reconf_delays=tuple(reconf_delays),
                    settings=settings,
                )
            )
        specs.append(
            ScenarioSpec(
                topology=topology,
                n_ranks=n_ranks,
                algorithm=AUTO_ALGORITHM,
                primitive=primitive,
                buffer_bytes=tuple(buffer_bytes),
                backend=BACKEND_RECONFIGURING,
                reconf_delays=tuple(reconf_delays),
                settings=settings,
            )
        )
    return specs


def run_grid(specs: Iterable[ScenarioSpec], workers: int = 1) -> list[Row]:
    """
    Run scenarios on up to `workers` processes.

    Results are concatenated in scenario-key order, so the output does not depend on which
    worker finishes first.
    """
    ordered = sorted(specs, key=lambda spec: spec.key)
    workers = Validator.validate_integer(workers, "workers", min_value=1)
    if workers == 1 or len(ordered) < 2:
        results = [run_benchmark(spec) for spec in ordered]
    else:
        with mp.get_context("spawn").Pool(processes=min(workers, len(ordered))) as pool:
            results = pool.map(run_benchmark, ordered)
    logger.info(
        "Benchmark grid finished",
        extra={"scenarios": len(ordered), "workers": workers},
    )
    return list(chain.from_iterable(results))


def r_sweep(
    topology: str,
    n_ranks: int,
    primitive: str,
    buffer_bytes: int,
    reconf_delays: Sequence[float],
    settings: SimulationSettings | None = None,
) -> list[Row]:
    """Reconfiguring backend at one buffer size across reconfiguration delays."""
    spec = ScenarioSpec(
        topology=topology,
        n_ranks=n_ranks,
        algorithm=AUTO_ALGORITHM,
        primitive=primitive,
        buffer_bytes=(buffer_bytes,),
        backend=BACKEND_RECONFIGURING,
        reconf_delays=tuple(Validator.validate_sequence(reconf_delays, "reconf_delays", 1)),
        settings=settings or SimulationSettings(),
    )
    return run_benchmark(spec)


def make_backend(name: str, settings: SimulationSettings, n: int) -> CommBackend:
    """Baseline algorithm name or "pccl"."""
    name = Validator.validate_choice(
        name, "backend", [*BASELINE_ALGORITHMS, BACKEND_RECONFIGURING]
    )
    if name == BACKEND_RECONFIGURING:
        return ReconfiguringBackend(
            standard_set=standard_topologies(settings, n),
            candidates=settings.planner_candidates,
            tx_per_gpu=settings.tx_per_gpu,
            rx_per_gpu=settings.rx_per_gpu,
        )
    return FixedTopologyBackend(name)


def prepare_graph(g: TaskGraph, epsilon: float = 0.0) -> TaskGraph:
    """Tag raw patterns, then order L-to-L transfers before their all-reduces."""
    return coschedule(tag_comm_nodes(g), epsilon)


def simulate_backends(
    g: TaskGraph,
    t0: Topology,
    backends: Sequence[str],
    settings: SimulationSettings,
    reconf_delay: float | None = None,
) -> dict[str, IterationReport]:
    params = settings.cost_params()
    if reconf_delay is not None:
        params = params.with_reconf_delay(reconf_delay)
    return {
        name: simulate(g, make_backend(name, settings, t0.n), t0, params) for name in backends
    }


def run_endtoend(
    graph_for: Callable[[int], TaskGraph] = build_transformer_graph,
    topologies: Sequence[str] = BASELINE_TOPOLOGIES,
    rank_counts: Sequence[int] = ENDTOEND_RANKS,
    backends: Sequence[str] = (*BASELINE_ALGORITHMS, BACKEND_RECONFIGURING),
    settings: SimulationSettings | None = None,
    reconf_delay: float | None = None,
) -> list[Row]:
    """
    Simulate one training iteration per (rank count, topology, backend).

    Args:
        graph_for: Builds the untagged task graph for a rank count
        topologies: Base topology kinds
        rank_counts: GPU counts
        backends: Baseline algorithm names and/or "pccl"
        settings: Cost and planner settings
        reconf_delay: Overrides the settings' reconfiguration delay

    Returns:
        endtoend rows
    """
    settings = settings or SimulationSettings()
    delay = settings.reconf_delay_s if reconf_delay is None else reconf_delay
    rows: list[Row] = []
    for n in rank_counts:
        g = prepare_graph(graph_for(n))
        for kind in topologies:
            t0 = make_default_topology(kind, n)
            reports = simulate_backends(g, t0, backends, settings, delay)
            for name, report in reports.items():
                rows.append(
                    {
                        "topology": kind,
                        "dims": list(t0.dims),
                        "n_ranks": n,
                        "backend": name,
                        "reconf_delay_s": delay,
                        "makespan_s": report.makespan_s,
                        "throughput": report.throughput,
                        "n_reconfigs": report.n_reconfigs,
                    }
                )
        logger.info("End-to-end runs finished", extra={"n_ranks": n, "rows": len(rows)})
    return rows


def cost_rows(
    t: Topology, s: Schedule, params: CostParams, scenario: str | None = None
) -> list[Row]:
    """
    Per-round cost breakdown of a schedule on a fixed topology.

    The topology never changes, so reconf_s is 0 on every round. scenario defaults to
    topology/algorithm/primitive.
    """
    cost = schedule_cost(t, s, params)
    label = scenario or f"{t.kind}/{s.algorithm}/{s.primitive}"
    return [
        {
            "scenario": label,
            "round": index,
            "dilation": entry.dilation,
            "congestion": entry.congestion,
            "alpha_term_s": entry.alpha_term,
            "beta_term_s": entry.beta_term,
            "reconf_s": 0.0,
            "transfers": len(transfers),
            "size_bytes": size,
            "connected": entry.connected,
            "time_s": entry.time,
        }
        for index, ((transfers, size), entry) in enumerate(zip(s, cost.per_round, strict=True))
    ]


def plan_meta(result: CollectivePlan) -> dict[str, Any]:
    """Plan report metadata; choices, reconfig_rounds and total_s head the JSON document."""
    return {
        "choices": list(result.plan.choices),
        "reconfig_rounds": list(result.plan.reconfig_rounds),
        "total_s": result.total_time,
        "algorithm": result.algorithm.value,
        "primitive": result.primitive.value,
        "n_reconfigs": result.n_reconfigs,
        "candidates": dict(result.candidate_totals),
    }


def plan_rows(result: CollectivePlan) -> list[Row]:
    return [
        {
            "round": entry.round,
            "choice": entry.choice,
            "kind": entry.kind,
            "reconfigured": entry.reconfigured,
            "reconf_s": entry.reconf_s,
            "dilation": entry.cost.dilation,
            "congestion": entry.cost.congestion,
            "comm_s": entry.comm_s,
        }
        for entry in result.plan.per_round
    ]


def simulation_rows(g: TaskGraph, report: IterationReport) -> list[Row]:
    comm = {record.node: record for record in report.comm}
    rows: list[Row] = []
    for node in g.nodes:
        record = comm.get(node.id)
        rows.append(
            {
                "node": node.id,
                "kind": node.kind.value,
                "tag": node.tag,
                "algorithm": record.algorithm if record else None,
                "start_s": report.starts[node.id],
                "finish_s": report.finishes[node.id],
                "n_reconfigs": record.n_reconfigs if record else 0,
            }
        )
    return rows
