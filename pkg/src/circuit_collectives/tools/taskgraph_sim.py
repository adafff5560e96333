"""
Replay of one distributed-training iteration as a task graph.

Compute nodes have fixed durations; communication nodes are valued by a backend, either a
collective algorithm on the fixed base topology or the reconfiguring planner that carries
the fabric state from one collective to the next. Nodes start as soon as all their
dependencies have finished.
"""

from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, replace
from enum import StrEnum
import heapq
from itertools import pairwise
from typing import Any

import networkx as nx

from src.circuit_collectives.config.error_constants import (
    ERROR_CYCLIC_GRAPH,
    ERROR_UNTAGGED_COMM,
)
from src.circuit_collectives.config.logging_config import LoggerMixin, get_logger
from src.circuit_collectives.config.sim_constants import (
    BACKEND_RECONFIGURING,
    PLANNER_CANDIDATES,
    RX_PER_GPU,
    TX_PER_GPU,
)
from src.circuit_collectives.error_management.exceptions import TaskGraphError
from src.circuit_collectives.error_management.validator import Validator
from src.circuit_collectives.tools.collectives import (
    Algorithm,
    Primitive,
    TransferSet,
    build_schedule,
)
from src.circuit_collectives.tools.cost_model import (
    CostParams,
    direct_circuit_cost,
    round_cost,
    schedule_cost,
)
from src.circuit_collectives.tools.reconfig_planner import plan_collective
from src.circuit_collectives.tools.topology import LATTICE_KINDS, Topology

logger = get_logger("tools.taskgraph_sim")


class NodeKind(StrEnum):
    COMPUTE = "compute"
    COMM = "comm"


L_TO_L = "l_to_l"
COMM_TAGS = (L_TO_L, *(primitive.value for primitive in Primitive))


@dataclass(frozen=True)
class PatternTransfer:
    """One point-to-point transfer of a raw communication pattern."""

    src: int
    dst: int
    bytes: float
    reduce: bool = False


@dataclass(frozen=True)
class CommSpec:
    """What a communication node moves; tag is None until the pattern is classified."""

    tag: str | None
    bytes: float
    ranks: tuple[int, ...]
    pattern: tuple[PatternTransfer, ...] = ()


@dataclass(frozen=True)
class TaskNode:
    id: str
    kind: NodeKind
    duration_s: float = 0.0
    comm: CommSpec | None = None
    layer: int | None = None

    @property
    def tag(self) -> str | None:
        return self.comm.tag if self.comm else None


@dataclass(frozen=True)
class TaskGraph:
    """Nodes in insertion order plus directed dependency edges."""

    nodes: tuple[TaskNode, ...]
    edges: tuple[tuple[str, str], ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ids = [node.id for node in self.nodes]
        if len(set(ids)) != len(ids):
            duplicate = next(node_id for node_id in ids if ids.count(node_id) > 1)
            raise TaskGraphError(f"duplicate node id {duplicate}", node=duplicate)
        known = set(ids)
        for src, dst in self.edges:
            for node_id in (src, dst):
                if node_id not in known:
                    raise TaskGraphError(f"edge references unknown node {node_id}", node=node_id)
        for node in self.nodes:
            if node.duration_s < 0:
                raise TaskGraphError(f"node {node.id} has a negative duration", node=node.id)
            if node.kind is NodeKind.COMM and (node.comm is None or not node.comm.ranks):
                raise TaskGraphError(f"comm node {node.id} has no participants", node=node.id)

    @property
    def by_id(self) -> dict[str, TaskNode]:
        return {node.id: node for node in self.nodes}

    @property
    def dag(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(node.id for node in self.nodes)
        graph.add_edges_from(self.edges)
        return graph

    def comm_nodes(self) -> list[TaskNode]:
        return [node for node in self.nodes if node.kind is NodeKind.COMM]

    @property
    def n_ranks(self) -> int:
        """Ranks the communication nodes address (highest rank + 1), 0 without any."""
        ranks = [max(node.comm.ranks) for node in self.comm_nodes() if node.comm]
        return max(ranks, default=-1) + 1


def classify_pattern(pattern: Sequence[PatternTransfer]) -> tuple[str, float, tuple[int, ...]]:
    """
    Tag a raw pattern as all_to_all, all_reduce or l_to_l.

    Returns:
        (tag, per-rank buffer bytes, participating ranks)
    """
    participants = tuple(sorted({t.src for t in pattern} | {t.dst for t in pattern}))
    if not pattern:
        return L_TO_L, 0.0, participants
    sizes = {t.bytes for t in pattern}
    pairs = [(t.src, t.dst) for t in pattern]
    uniform = len(sizes) == 1 and len(set(pairs)) == len(pairs) and len(participants) >= 2
    size = max(sizes)

    all_pairs = {(s, d) for s in participants for d in participants if s != d}
    if uniform and not any(t.reduce for t in pattern) and set(pairs) == all_pairs:
        return Primitive.ALL_TO_ALL.value, size * len(participants), participants

    senders = {t.src for t in pattern}
    receivers = {t.dst for t in pattern}
    if (
        uniform
        and all(t.reduce for t in pattern)
        and senders == receivers == set(participants)
        and nx.is_connected(nx.Graph(pairs))
    ):
        return Primitive.ALL_REDUCE.value, size, participants

    return L_TO_L, size, participants


def tag_comm_nodes(g: TaskGraph) -> TaskGraph:
    """Label every untagged comm node from its raw transfer pattern."""
    nodes = []
    for node in g.nodes:
        if node.comm is not None and node.comm.tag is None:
            tag, size, ranks = classify_pattern(node.comm.pattern)
            node = replace(node, comm=replace(node.comm, tag=tag, bytes=size, ranks=ranks))
            logger.debug("Tagged comm node", extra={"node": node.id, "tag": tag})
        nodes.append(node)
    return replace(g, nodes=tuple(nodes))


def _require_dag(g: TaskGraph) -> nx.DiGraph:
    dag = g.dag
    if not nx.is_directed_acyclic_graph(dag):
        raise TaskGraphError(ERROR_CYCLIC_GRAPH, context={"cycle": nx.find_cycle(dag)})
    return dag


def _require_tagged(g: TaskGraph) -> None:
    for node in g.comm_nodes():
        if node.tag is None:
            raise TaskGraphError(ERROR_UNTAGGED_COMM % node.id, node=node.id)


def readiness_times(g: TaskGraph) -> dict[str, float]:
    """Earliest start of every node with communication valued at zero."""
    dag = _require_dag(g)
    own = {
        node.id: node.duration_s if node.kind is NodeKind.COMPUTE else 0.0 for node in g.nodes
    }
    start: dict[str, float] = {}
    for node_id in nx.topological_sort(dag):
        start[node_id] = max(
            (start[pred] + own[pred] for pred in dag.predecessors(node_id)), default=0.0
        )
    return start


def coschedule(g: TaskGraph, epsilon: float = 0.0) -> TaskGraph:
    """
    Order L-to-L transfers before all-reduces enqueued alongside them.

    For each l_to_l and all_reduce pair from the same layer whose readiness times differ by
    at most epsilon, add the dependency l_to_l -> all_reduce. An edge that would close a
    cycle is skipped with a warning.
    """
    epsilon = Validator.validate_number(epsilon, "epsilon", min_value=0.0)
    _require_tagged(g)
    ready = readiness_times(g)
    dag = g.dag
    edges = list(g.edges)
    warnings = list(g.warnings)

    transfers = [node for node in g.comm_nodes() if node.tag == L_TO_L]
    reductions = [node for node in g.comm_nodes() if node.tag == Primitive.ALL_REDUCE.value]
    for first in transfers:
        for second in reductions:
            if first.layer != second.layer or abs(ready[first.id] - ready[second.id]) > epsilon:
                continue
            if dag.has_edge(first.id, second.id):
                continue
            if nx.has_path(dag, second.id, first.id):
                message = f"skipped {first.id} -> {second.id}: it would create a cycle"
                logger.warning(message, extra={"node": first.id})
                warnings.append(message)
                continue
            dag.add_edge(first.id, second.id)
            edges.append((first.id, second.id))
    return replace(g, edges=tuple(edges), warnings=tuple(warnings))


@dataclass(frozen=True)
class CommRecord:
    node: str
    tag: str
    algorithm: str
    duration_s: float
    n_reconfigs: int = 0


class BackendSession(ABC):
    """Values communication nodes for one iteration; may carry fabric state."""

    def __init__(self, t0: Topology, params: CostParams):
        self.t0 = t0
        self.params = params

    @abstractmethod
    def value(self, node: TaskNode) -> CommRecord: ...

    def _transfers(self, node: TaskNode) -> TransferSet:
        assert node.comm is not None
        if node.comm.pattern:
            return TransferSet.of((t.src, t.dst) for t in node.comm.pattern)
        return TransferSet.of(pairwise(node.comm.ranks))


class CommBackend(ABC):
    name: str

    @abstractmethod
    def session(self, t0: Topology, params: CostParams) -> BackendSession: ...


class _FixedSession(BackendSession):
    def __init__(self, t0: Topology, params: CostParams, algorithm: Algorithm):
        super().__init__(t0, params)
        self.algorithm = algorithm

    def value(self, node: TaskNode) -> CommRecord:
        assert node.comm is not None and node.tag is not None
        if node.tag == L_TO_L:
            cost = round_cost(self.t0, self._transfers(node), node.comm.bytes, self.params)
            return CommRecord(node.id, L_TO_L, L_TO_L, cost.time)

        primitive = Primitive(node.tag)
        algorithm = Algorithm.DEX if primitive is Primitive.ALL_TO_ALL else self.algorithm
        planned = Primitive.REDUCE_SCATTER if primitive is Primitive.ALL_REDUCE else primitive
        schedule = build_schedule(
            algorithm,
            planned,
            node.comm.bytes,
            self.t0.n,
            ranks=node.comm.ranks,
            dims=self.t0.dims if self.t0.kind in LATTICE_KINDS else None,
        )
        duration = schedule_cost(self.t0, schedule, self.params).total_time
        if primitive is Primitive.ALL_REDUCE:
            duration *= 2
        return CommRecord(node.id, node.tag, algorithm.value, duration)


class FixedTopologyBackend(CommBackend):
    """Baseline: one collective algorithm on the fixed base topology."""

    def __init__(self, algorithm: str | Algorithm):
        self.algorithm = Algorithm(
            Validator.validate_choice(
                algorithm, "algorithm", [Algorithm.RING, Algorithm.RHD, Algorithm.BUCKET]
            )
        )
        self.name = self.algorithm.value

    def session(self, t0: Topology, params: CostParams) -> BackendSession:
        return _FixedSession(t0, params, self.algorithm)


class _ReconfiguringSession(BackendSession, LoggerMixin):
    def __init__(self, t0: Topology, params: CostParams, backend: "ReconfiguringBackend"):
        super().__init__(t0, params)
        self.backend = backend
        self.state = t0

    def value(self, node: TaskNode) -> CommRecord:
        assert node.comm is not None and node.tag is not None
        if node.tag == L_TO_L:
            duration = direct_circuit_cost(node.comm.bytes, self.params)
            return CommRecord(node.id, L_TO_L, L_TO_L, duration)

        result = plan_collective(
            Primitive(node.tag),
            node.comm.bytes,
            self.state,
            self.params,
            ranks=node.comm.ranks,
            standard_set=self.backend.standard_set,
            candidates=self.backend.candidates,
            tx_per_gpu=self.backend.tx_per_gpu,
            rx_per_gpu=self.backend.rx_per_gpu,
        )
        self.state = result.final_topology
        self.logger.debug(
            "Planned collective",
            extra={
                "node": node.id,
                "algorithm": result.algorithm.value,
                "total_s": result.total_time,
            },
        )
        return CommRecord(
            node.id, node.tag, result.algorithm.value, result.total_time, result.n_reconfigs
        )


class ReconfiguringBackend(CommBackend):
    """Collectives planned on the reconfigurable fabric, L-to-L on direct circuits."""

    name = BACKEND_RECONFIGURING

    def __init__(
        self,
        standard_set: tuple[Topology, ...] = (),
        candidates: tuple[str, ...] = PLANNER_CANDIDATES,
        tx_per_gpu: int = TX_PER_GPU,
        rx_per_gpu: int = RX_PER_GPU,
    ):
        self.standard_set = standard_set
        self.candidates = candidates
        self.tx_per_gpu = tx_per_gpu
        self.rx_per_gpu = rx_per_gpu

    def session(self, t0: Topology, params: CostParams) -> BackendSession:
        return _ReconfiguringSession(t0, params, self)


@dataclass(frozen=True)
class IterationReport:
    backend: str
    makespan_s: float
    starts: dict[str, float]
    finishes: dict[str, float]
    comm: tuple[CommRecord, ...] = ()

    @property
    def throughput(self) -> float:
        """Iterations per second."""
        return 1.0 / self.makespan_s if self.makespan_s > 0 else 0.0

    @property
    def n_reconfigs(self) -> int:
        return sum(record.n_reconfigs for record in self.comm)


def simulate(
    g: TaskGraph, backend: CommBackend, t0: Topology, params: CostParams
) -> IterationReport:
    """
    Run the iteration: every node starts when its last dependency finishes.

    Nodes are dispatched in order of ready time, then id, and a stateful backend sees the
    collectives in that order.

    Raises:
        TaskGraphError: If the graph is cyclic or has untagged comm nodes
    """
    dag = _require_dag(g)
    _require_tagged(g)
    nodes = g.by_id
    session = backend.session(t0, params)

    remaining = {node_id: dag.in_degree(node_id) for node_id in dag.nodes}
    ready_at = dict.fromkeys(dag.nodes, 0.0)
    heap = [(0.0, node_id) for node_id, count in remaining.items() if count == 0]
    heapq.heapify(heap)

    starts: dict[str, float] = {}
    finishes: dict[str, float] = {}
    records: list[CommRecord] = []
    while heap:
        start, node_id = heapq.heappop(heap)
        node = nodes[node_id]
        if node.kind is NodeKind.COMPUTE:
            duration = node.duration_s
        else:
            record = session.value(node)
            records.append(record)
            duration = record.duration_s
        starts[node_id] = start
        finishes[node_id] = start + duration
        for succ in dag.successors(node_id):
            ready_at[succ] = max(ready_at[succ], finishes[node_id])
            remaining[succ] -= 1
            if remaining[succ] == 0:
                heapq.heappush(heap, (ready_at[succ], succ))

    report = IterationReport(
        backend=backend.name,
        makespan_s=max(finishes.values(), default=0.0),
        starts=starts,
        finishes=finishes,
        comm=tuple(records),
    )
    logger.info(
        "Simulated iteration",
        extra={
            "backend": backend.name,
            "makespan_s": report.makespan_s,
            "n_reconfigs": report.n_reconfigs,
        },
    )
    return report


def _pattern_from_dict(item: Any, label: str) -> PatternTransfer:
    item = Validator.validate_dict(item, label, required_keys=["src", "dst", "bytes"])
    return PatternTransfer(
        src=Validator.validate_integer(item["src"], f"{label}.src", min_value=0),
        dst=Validator.validate_integer(item["dst"], f"{label}.dst", min_value=0),
        bytes=Validator.validate_number(item["bytes"], f"{label}.bytes", min_value=0.0),
        reduce=Validator.validate_boolean(item.get("reduce", False), f"{label}.reduce"),
    )


def _comm_from_dict(data: Any, label: str) -> CommSpec:
    data = Validator.validate_dict(data, label)
    pattern = tuple(
        _pattern_from_dict(item, f"{label}.pattern[{i}]")
        for i, item in enumerate(Validator.validate_sequence(data.get("pattern", []), label))
    )
    if pattern:
        ranks = tuple(sorted({t.src for t in pattern} | {t.dst for t in pattern}))
        size = max(t.bytes for t in pattern)
        return CommSpec(tag=None, bytes=size, ranks=ranks, pattern=pattern)

    data = Validator.validate_dict(data, label, required_keys=["primitive", "bytes", "ranks"])
    ranks = Validator.validate_sequence(data["ranks"], f"{label}.ranks", min_length=1)
    return CommSpec(
        tag=Validator.validate_choice(data["primitive"], f"{label}.primitive", COMM_TAGS),
        bytes=Validator.validate_number(data["bytes"], f"{label}.bytes", min_value=0.0),
        ranks=tuple(
            Validator.validate_integer(rank, f"{label}.ranks[{i}]", min_value=0)
            for i, rank in enumerate(ranks)
        ),
    )


def graph_from_dict(data: Any) -> TaskGraph:
    """
    Load a task graph; field errors name their location (e.g. nodes[3].duration_s).

    Raises:
        ValidationError: On malformed fields
        TaskGraphError: On duplicate ids or edges to unknown nodes
    """
    data = Validator.validate_dict(data, "taskgraph", required_keys=["nodes"])
    nodes: list[TaskNode] = []
    for index, item in enumerate(Validator.validate_sequence(data["nodes"], "nodes")):
        label = f"nodes[{index}]"
        item = Validator.validate_dict(item, label, required_keys=["id", "kind"])
        kind = NodeKind(Validator.validate_choice(item["kind"], f"{label}.kind", list(NodeKind)))
        layer = item.get("layer")
        nodes.append(
            TaskNode(
                id=str(item["id"]),
                kind=kind,
                duration_s=Validator.validate_number(
                    item.get("duration_s", 0.0), f"{label}.duration_s", min_value=0.0
                ),
                comm=_comm_from_dict(item["comm"], f"{label}.comm")
                if kind is NodeKind.COMM and "comm" in item
                else None,
                layer=None
                if layer is None
                else Validator.validate_integer(layer, f"{label}.layer"),
            )
        )
    edges = []
    for index, pair in enumerate(Validator.validate_sequence(data.get("edges", []), "edges")):
        src, dst = Validator.validate_sequence(pair, f"edges[{index}]", min_length=2)[:2]
        edges.append((str(src), str(dst)))
    return TaskGraph(nodes=tuple(nodes), edges=tuple(edges))


def _comm_to_dict(comm: CommSpec) -> dict[str, Any]:
    if comm.pattern:
        return {
            "pattern": [
                {"src": t.src, "dst": t.dst, "bytes": t.bytes, "reduce": t.reduce}
                for t in comm.pattern
            ]
        }
    return {"primitive": comm.tag, "bytes": comm.bytes, "ranks": list(comm.ranks)}


def graph_to_dict(g: TaskGraph) -> dict[str, Any]:
    nodes: list[dict[str, Any]] = []
    for node in g.nodes:
        entry: dict[str, Any] = {"id": node.id, "kind": node.kind.value}
        if node.kind is NodeKind.COMPUTE:
            entry["duration_s"] = node.duration_s
        if node.comm is not None:
            entry["comm"] = _comm_to_dict(node.comm)
        if node.layer is not None:
            entry["layer"] = node.layer
        nodes.append(entry)
    return {"nodes": nodes, "edges": [list(edge) for edge in g.edges]}
