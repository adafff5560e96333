"""
Tests for tools.taskgraph_sim using pytest best practices.
"""

import math
from typing import Any

from hypothesis import given, settings
from hypothesis import strategies as st
import pytest
from src.circuit_collectives.config.sim_constants import MIB
from src.circuit_collectives.error_management.exceptions import TaskGraphError, ValidationError
from src.circuit_collectives.tools.collectives import Primitive, TransferSet
from src.circuit_collectives.tools.cost_model import CostParams, direct_circuit_cost, round_cost
from src.circuit_collectives.tools.reconfig_planner import plan_collective
from src.circuit_collectives.tools.taskgraph_sim import (
    L_TO_L,
    CommSpec,
    FixedTopologyBackend,
    NodeKind,
    PatternTransfer,
    ReconfiguringBackend,
    TaskGraph,
    TaskNode,
    classify_pattern,
    coschedule,
    graph_from_dict,
    graph_to_dict,
    readiness_times,
    simulate,
    tag_comm_nodes,
)
from src.circuit_collectives.tools.topology import Topology, make_topology

from tests.oracles import longest_path_makespan

RANKS8 = tuple(range(8))


def compute(node_id: str, duration_s: float, layer: int | None = None) -> TaskNode:
    return TaskNode(node_id, NodeKind.COMPUTE, duration_s=duration_s, layer=layer)


def collective(node_id: str, tag: str, size: float, layer: int | None = None) -> TaskNode:
    return TaskNode(node_id, NodeKind.COMM, comm=CommSpec(tag, size, RANKS8), layer=layer)


def half_ring(size: float, layer: int | None = None, node_id: str = "send") -> TaskNode:
    pattern = tuple(PatternTransfer(rank, (rank + 4) % 8, size) for rank in RANKS8)
    return TaskNode(
        node_id, NodeKind.COMM, comm=CommSpec(None, size, RANKS8, pattern), layer=layer
    )


@st.composite
def task_graphs(draw: st.DrawFn) -> TaskGraph:
    """Random DAGs whose edges only point from lower to higher node index."""
    count = draw(st.integers(1, 12))
    nodes = []
    for index in range(count):
        if draw(st.booleans()):
            nodes.append(compute(f"n{index}", draw(st.floats(0.0, 1e-3))))
        else:
            tag = draw(st.sampled_from([Primitive.ALL_REDUCE.value, Primitive.ALL_GATHER.value]))
            nodes.append(collective(f"n{index}", tag, float(draw(st.integers(1, 64)) * MIB)))
    pairs = [(i, j) for i in range(count) for j in range(i + 1, count)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return TaskGraph(
        nodes=tuple(nodes), edges=tuple((f"n{i}", f"n{j}") for i, j in sorted(chosen))
    )


class TestClassifyPattern:
    """Test cases for classify_pattern."""

    @pytest.mark.unit
    def test_all_to_all(self) -> None:
        """Test a uniform full exchange is an all-to-all over the whole buffer."""
        pattern = [PatternTransfer(s, d, 1024.0) for s in range(4) for d in range(4) if s != d]

        assert classify_pattern(pattern) == ("all_to_all", 4096.0, (0, 1, 2, 3))

    @pytest.mark.unit
    def test_all_reduce(self) -> None:
        """Test a connected uniform reduction among the same senders and receivers."""
        pattern = [PatternTransfer(r, (r + 1) % 4, 512.0, reduce=True) for r in range(4)]

        assert classify_pattern(pattern) == ("all_reduce", 512.0, (0, 1, 2, 3))

    @pytest.mark.unit
    def test_point_to_point(self) -> None:
        """Test a partial exchange falls back to L-to-L."""
        node = half_ring(2048.0)
        assert node.comm is not None

        assert classify_pattern(node.comm.pattern) == (L_TO_L, 2048.0, RANKS8)

    @pytest.mark.unit
    def test_mixed_sizes(self) -> None:
        """Test non-uniform transfers are L-to-L sized by the largest."""
        pattern = [PatternTransfer(0, 1, 10.0), PatternTransfer(1, 0, 30.0)]

        assert classify_pattern(pattern) == (L_TO_L, 30.0, (0, 1))

    @pytest.mark.unit
    def test_reduction_between_two_groups(self) -> None:
        """Test a reduction split into disconnected pairs is not an all-reduce."""
        pattern = [
            PatternTransfer(0, 1, 8.0, True),
            PatternTransfer(1, 0, 8.0, True),
            PatternTransfer(2, 3, 8.0, True),
            PatternTransfer(3, 2, 8.0, True),
        ]

        assert classify_pattern(pattern)[0] == L_TO_L

    @pytest.mark.unit
    def test_empty(self) -> None:
        """Test an empty pattern moves nothing."""
        assert classify_pattern([]) == (L_TO_L, 0.0, ())


class TestTagAndCoschedule:
    """Test cases for tag_comm_nodes and coschedule."""

    @pytest.fixture  # type: ignore[misc]
    def layer_graph(self) -> TaskGraph:
        return TaskGraph(
            nodes=(
                compute("mlp", 1e-3, layer=0),
                half_ring(MIB, layer=0),
                collective("grad", Primitive.ALL_REDUCE.value, 8 * MIB, layer=0),
                collective("other", Primitive.ALL_REDUCE.value, 8 * MIB, layer=1),
            ),
            edges=(("mlp", "send"), ("mlp", "grad"), ("mlp", "other")),
        )

    @pytest.mark.unit
    def test_tagging(self, layer_graph: TaskGraph) -> None:
        """Test untagged nodes are labelled and tagged ones are kept."""
        tagged = tag_comm_nodes(layer_graph)

        assert [node.tag for node in tagged.nodes] == [None, L_TO_L, "all_reduce", "all_reduce"]
        raw = layer_graph.by_id["send"].comm
        assert raw is not None
        assert tagged.by_id["send"].comm == CommSpec(L_TO_L, float(MIB), RANKS8, raw.pattern)

    @pytest.mark.unit
    def test_same_layer_gets_ordered(self, layer_graph: TaskGraph) -> None:
        """Test the transfer runs before the all-reduce of its own layer only."""
        result = coschedule(tag_comm_nodes(layer_graph))

        assert ("send", "grad") in result.edges
        assert ("send", "other") not in result.edges
        assert result.warnings == ()

    @pytest.mark.unit
    def test_epsilon_window(self) -> None:
        """Test readiness times further apart than epsilon are left alone."""
        g = TaskGraph(
            nodes=(
                compute("a", 1e-3, layer=0),
                half_ring(MIB, layer=0),
                collective("grad", Primitive.ALL_REDUCE.value, MIB, layer=0),
            ),
            edges=(("a", "grad"),),
        )
        tagged = tag_comm_nodes(g)

        assert ("send", "grad") not in coschedule(tagged).edges
        assert ("send", "grad") in coschedule(tagged, epsilon=1e-3).edges

    @pytest.mark.unit
    def test_cycle_skipped_with_warning(self) -> None:
        """Test an ordering that would close a cycle becomes a warning."""
        g = TaskGraph(
            nodes=(
                collective("grad", Primitive.ALL_REDUCE.value, 0.0, layer=0),
                half_ring(MIB, layer=0),
            ),
            edges=(("grad", "send"),),
        )

        result = coschedule(tag_comm_nodes(g))

        assert result.edges == (("grad", "send"),)
        assert len(result.warnings) == 1
        assert "cycle" in result.warnings[0]

    @pytest.mark.unit
    def test_untagged_rejected(self, layer_graph: TaskGraph) -> None:
        """Test coschedule needs every comm node tagged."""
        with pytest.raises(TaskGraphError) as exc_info:
            coschedule(layer_graph)

        assert exc_info.value.node == "send"

    @pytest.mark.unit
    def test_readiness_ignores_comm_time(self) -> None:
        """Test comm nodes count as instantaneous when computing readiness."""
        g = TaskGraph(
            nodes=(
                compute("a", 2.0),
                collective("ar", Primitive.ALL_REDUCE.value, MIB),
                compute("b", 1.0),
            ),
            edges=(("a", "ar"), ("ar", "b")),
        )

        assert readiness_times(g) == {"a": 0.0, "ar": 2.0, "b": 2.0}


class TestSimulate:
    """Test cases for simulate."""

    @pytest.mark.unit
    @settings(max_examples=60)
    @given(g=task_graphs())
    def test_makespan_is_longest_path(self, g: TaskGraph) -> None:
        """Test the makespan matches a longest-path walk over the valued durations."""
        ring = make_topology("ring", [8])
        report = simulate(g, FixedTopologyBackend("ring"), ring, CostParams())

        durations = {node.id: node.duration_s for node in g.nodes}
        durations.update({record.node: record.duration_s for record in report.comm})
        expected = longest_path_makespan(durations, g.edges)
        assert math.isclose(report.makespan_s, expected, rel_tol=1e-12, abs_tol=1e-15)
        for src, dst in g.edges:
            assert report.starts[dst] >= report.finishes[src]

    @pytest.mark.unit
    def test_compute_chain(self, ring8: Topology, params: CostParams) -> None:
        """Test a compute-only chain finishes at the sum of its durations."""
        g = TaskGraph(nodes=(compute("a", 1.0), compute("b", 2.0)), edges=(("a", "b"),))

        report = simulate(g, FixedTopologyBackend("ring"), ring8, params)

        assert report.makespan_s == 3.0
        assert report.starts == {"a": 0.0, "b": 1.0}
        assert report.throughput == pytest.approx(1 / 3)
        assert report.comm == ()

    @pytest.mark.unit
    def test_empty_graph(self, ring8: Topology, params: CostParams) -> None:
        """Test an empty iteration takes no time."""
        empty = TaskGraph(nodes=(), edges=())

        report = simulate(empty, FixedTopologyBackend("ring"), ring8, params)

        assert report.makespan_s == 0.0
        assert report.throughput == 0.0

    @pytest.mark.unit
    def test_fixed_point_to_point(self, ring8: Topology, params: CostParams) -> None:
        """Test the fixed backend routes an L-to-L pattern over the base topology."""
        g = tag_comm_nodes(TaskGraph(nodes=(half_ring(MIB),), edges=()))
        send = g.by_id["send"]
        assert send.comm is not None

        report = simulate(g, FixedTopologyBackend("rhd"), ring8, params)

        transfers = TransferSet.of((t.src, t.dst) for t in send.comm.pattern)
        assert report.comm[0].duration_s == round_cost(ring8, transfers, MIB, params).time
        assert report.comm[0].algorithm == L_TO_L

    @pytest.mark.unit
    def test_fixed_all_to_all_uses_dex(self, torus444: Topology, params: CostParams) -> None:
        """Test the baseline runs all-to-all with the pairwise exchange."""
        node = TaskNode(
            "a2a",
            NodeKind.COMM,
            comm=CommSpec(Primitive.ALL_TO_ALL.value, 64 * MIB, tuple(range(64))),
        )

        report = simulate(
            TaskGraph(nodes=(node,), edges=()), FixedTopologyBackend("bucket"), torus444, params
        )

        assert report.comm[0].algorithm == "dex"

    @pytest.mark.unit
    def test_reconfiguring_point_to_point(self, ring8: Topology, params: CostParams) -> None:
        """Test the reconfiguring backend sends L-to-L over a direct circuit."""
        g = tag_comm_nodes(TaskGraph(nodes=(half_ring(MIB),), edges=()))

        report = simulate(g, ReconfiguringBackend(), ring8, params)

        assert report.comm[0].duration_s == direct_circuit_cost(MIB, params)
        assert report.backend == "pccl"

    @pytest.mark.unit
    def test_reconfiguring_carries_fabric_state(self, ring8: Topology, params: CostParams) -> None:
        """Test the second collective is planned from where the first left the fabric."""
        g = TaskGraph(
            nodes=(
                collective("first", Primitive.ALL_GATHER.value, 8 * MIB),
                collective("second", Primitive.ALL_REDUCE.value, 32 * MIB),
            ),
            edges=(("first", "second"),),
        )

        report = simulate(g, ReconfiguringBackend(), ring8, params)

        first = plan_collective(Primitive.ALL_GATHER, 8 * MIB, ring8, params, ranks=RANKS8)
        second = plan_collective(
            Primitive.ALL_REDUCE, 32 * MIB, first.final_topology, params, ranks=RANKS8
        )
        assert [record.duration_s for record in report.comm] == [
            first.total_time,
            second.total_time,
        ]
        assert report.n_reconfigs == first.n_reconfigs + second.n_reconfigs
        assert report.makespan_s == pytest.approx(first.total_time + second.total_time)

    @pytest.mark.unit
    def test_cyclic_graph(self, ring8: Topology, params: CostParams) -> None:
        """Test a dependency cycle is rejected."""
        g = TaskGraph(nodes=(compute("a", 1.0), compute("b", 1.0)), edges=(("a", "b"), ("b", "a")))

        with pytest.raises(TaskGraphError) as exc_info:
            simulate(g, FixedTopologyBackend("ring"), ring8, params)

        assert "cycle" in exc_info.value.context

    @pytest.mark.unit
    def test_untagged_graph(self, ring8: Topology, params: CostParams) -> None:
        """Test raw patterns must be classified first."""
        g = TaskGraph(nodes=(half_ring(MIB),), edges=())

        with pytest.raises(TaskGraphError) as exc_info:
            simulate(g, ReconfiguringBackend(), ring8, params)

        assert exc_info.value.node == "send"

    @pytest.mark.unit
    def test_unknown_baseline_algorithm(self) -> None:
        """Test the pairwise exchange is not a standalone baseline."""
        with pytest.raises(ValidationError) as exc_info:
            FixedTopologyBackend("dex")

        assert exc_info.value.field == "algorithm"


class TestTaskGraph:
    """Test cases for TaskGraph construction."""

    @pytest.mark.unit
    def test_duplicate_id(self) -> None:
        """Test node ids are unique."""
        with pytest.raises(TaskGraphError) as exc_info:
            TaskGraph(nodes=(compute("a", 1.0), compute("a", 2.0)), edges=())

        assert exc_info.value.node == "a"

    @pytest.mark.unit
    def test_unknown_edge_endpoint(self) -> None:
        """Test edges reference existing nodes."""
        with pytest.raises(TaskGraphError) as exc_info:
            TaskGraph(nodes=(compute("a", 1.0),), edges=(("a", "z"),))

        assert exc_info.value.node == "z"

    @pytest.mark.unit
    def test_negative_duration(self) -> None:
        """Test durations are non-negative."""
        with pytest.raises(TaskGraphError):
            TaskGraph(nodes=(compute("a", -1.0),), edges=())

    @pytest.mark.unit
    def test_comm_without_ranks(self) -> None:
        """Test a comm node needs participants."""
        node = TaskNode("c", NodeKind.COMM, comm=CommSpec("all_reduce", 1.0, ()))

        with pytest.raises(TaskGraphError) as exc_info:
            TaskGraph(nodes=(node,), edges=())

        assert exc_info.value.node == "c"


class TestSerialization:
    """Test cases for graph_from_dict and graph_to_dict."""

    @pytest.fixture  # type: ignore[misc]
    def data(self) -> dict[str, Any]:
        return {
            "nodes": [
                {"id": "fwd", "kind": "compute", "duration_s": 0.001, "layer": 0},
                {
                    "id": "ar",
                    "kind": "comm",
                    "comm": {"primitive": "all_reduce", "bytes": 1048576.0, "ranks": [0, 1, 2, 3]},
                    "layer": 0,
                },
                {
                    "id": "send",
                    "kind": "comm",
                    "comm": {
                        "pattern": [
                            {"src": 0, "dst": 2, "bytes": 64.0, "reduce": False},
                            {"src": 1, "dst": 3, "bytes": 64.0, "reduce": False},
                        ]
                    },
                },
            ],
            "edges": [["fwd", "ar"], ["fwd", "send"]],
        }

    @pytest.mark.unit
    def test_load(self, data: dict[str, Any]) -> None:
        """Test tagged and raw comm nodes load with their participants."""
        g = graph_from_dict(data)

        assert g.by_id["ar"].comm == CommSpec("all_reduce", 1048576.0, (0, 1, 2, 3))
        assert g.by_id["send"].tag is None
        assert g.by_id["send"].comm.ranks == (0, 1, 2, 3)  # type: ignore[union-attr]
        assert g.edges == (("fwd", "ar"), ("fwd", "send"))

    @pytest.mark.unit
    def test_dump_restores_input(self, data: dict[str, Any]) -> None:
        """Test dumping a loaded graph gives back the document."""
        assert graph_to_dict(graph_from_dict(data)) == data

    @pytest.mark.unit
    def test_field_location_in_error(self, data: dict[str, Any]) -> None:
        """Test a bad field is reported with its position."""
        data["nodes"][0]["duration_s"] = -1.0

        with pytest.raises(ValidationError) as exc_info:
            graph_from_dict(data)

        assert exc_info.value.field == "nodes[0].duration_s"

    @pytest.mark.unit
    def test_unknown_primitive(self, data: dict[str, Any]) -> None:
        """Test comm tags are checked against the known primitives."""
        data["nodes"][1]["comm"]["primitive"] = "broadcast"

        with pytest.raises(ValidationError) as exc_info:
            graph_from_dict(data)

        assert exc_info.value.field == "nodes[1].comm.primitive"

    @pytest.mark.unit
    def test_missing_nodes(self) -> None:
        """Test the nodes list is required."""
        with pytest.raises(ValidationError) as exc_info:
            graph_from_dict({"edges": []})

        assert exc_info.value.context["missing_keys"] == ["nodes"]
