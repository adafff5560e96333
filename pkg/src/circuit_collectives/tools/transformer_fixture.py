"""
Synthetic transformer training iteration for end-to-end comparisons.

Forward and backward passes form one chain of compute nodes joined by tensor-parallel
all-reduces. Weight-gradient all-reduces hang off the backward chain and join at the
optimizer step, and an activation transfer crosses every stage boundary. Collective sizes
walk the buffer ladder in ascending order, cycling, in the order the nodes are created.
"""

from collections.abc import Iterator, Sequence
from itertools import cycle

from src.circuit_collectives.config.fixture_constants import (
    ACTIVATION_BYTES_PER_HEAD,
    ATTENTION_WORK_FACTOR,
    BACKWARD_WORK_FACTOR,
    BUFFER_LADDER_MIB,
    MLP_WORK_FACTOR,
    OPTIMIZER_STEP_S,
    SECONDS_PER_HIDDEN_SQUARED,
    STAGE_LAYERS,
    TRANSFORMER_HEADS,
    TRANSFORMER_HIDDEN,
    TRANSFORMER_LAYERS,
)
from src.circuit_collectives.config.sim_constants import MIB
from src.circuit_collectives.error_management.validator import Validator
from src.circuit_collectives.tools.collectives import Primitive
from src.circuit_collectives.tools.taskgraph_sim import (
    CommSpec,
    NodeKind,
    PatternTransfer,
    TaskGraph,
    TaskNode,
)


class _GraphBuilder:
    def __init__(self, n_ranks: int, ladder: Sequence[int]):
        self.ranks = tuple(range(n_ranks))
        self.sizes: Iterator[int] = cycle(ladder)
        self.nodes: list[TaskNode] = []
        self.edges: list[tuple[str, str]] = []

    def compute(self, node_id: str, duration_s: float, layer: int, after: str | None) -> str:
        self.nodes.append(TaskNode(node_id, NodeKind.COMPUTE, duration_s=duration_s, layer=layer))
        if after is not None:
            self.edges.append((after, node_id))
        return node_id

    def all_reduce(self, node_id: str, layer: int, after: str) -> str:
        comm = CommSpec(
            tag=Primitive.ALL_REDUCE.value, bytes=float(next(self.sizes) * MIB), ranks=self.ranks
        )
        self.nodes.append(TaskNode(node_id, NodeKind.COMM, comm=comm, layer=layer))
        self.edges.append((after, node_id))
        return node_id

    def stage_transfer(self, node_id: str, layer: int, after: str, size: float) -> str:
        """Untagged pattern: every rank ships activations to its peer half a ring away."""
        n = len(self.ranks)
        pattern = tuple(PatternTransfer(rank, (rank + n // 2) % n, size) for rank in self.ranks)
        comm = CommSpec(tag=None, bytes=size, ranks=self.ranks, pattern=pattern)
        self.nodes.append(TaskNode(node_id, NodeKind.COMM, comm=comm, layer=layer))
        self.edges.append((after, node_id))
        return node_id

    def join(self, node_id: str, *preds: str) -> None:
        self.edges.extend((pred, node_id) for pred in preds)

    def graph(self) -> TaskGraph:
        return TaskGraph(nodes=tuple(self.nodes), edges=tuple(self.edges))


def build_transformer_graph(
    n_ranks: int,
    layers: int = TRANSFORMER_LAYERS,
    heads: int = TRANSFORMER_HEADS,
    hidden: int = TRANSFORMER_HIDDEN,
    ladder: Sequence[int] = BUFFER_LADDER_MIB,
    stage_layers: int = STAGE_LAYERS,
) -> TaskGraph:
    """
    Build one training iteration over n_ranks GPUs.

    Stage transfers are left untagged; run tag_comm_nodes and coschedule before simulating.

    Args:
        n_ranks: GPUs taking part in every collective
        layers: Transformer layers
        heads: Attention heads; scales the activation transfer
        hidden: Hidden width; compute time grows with its square
        ladder: Collective buffer sizes in MiB
        stage_layers: Layers per pipeline stage

    Returns:
        Task graph ending in a single optimizer node
    """
    n_ranks = Validator.validate_integer(n_ranks, "n_ranks", min_value=2)
    layers = Validator.validate_integer(layers, "layers", min_value=1)
    heads = Validator.validate_integer(heads, "heads", min_value=1)
    hidden = Validator.validate_integer(hidden, "hidden", min_value=1)
    stage_layers = Validator.validate_integer(stage_layers, "stage_layers", min_value=1)
    ladder = [
        Validator.validate_integer(size, "ladder", min_value=1)
        for size in Validator.validate_sequence(ladder, "ladder", min_length=1)
    ]

    unit = SECONDS_PER_HIDDEN_SQUARED * hidden * hidden
    attention_s = unit * ATTENTION_WORK_FACTOR
    mlp_s = unit * MLP_WORK_FACTOR
    activation_bytes = float(ACTIVATION_BYTES_PER_HEAD * heads)
    b = _GraphBuilder(n_ranks, ladder)

    tail: str | None = None
    for layer in range(layers):
        attn = b.compute(f"f{layer:02d}_attn", attention_s, layer, tail)
        attn_ar = b.all_reduce(f"f{layer:02d}_attn_ar", layer, attn)
        mlp = b.compute(f"f{layer:02d}_mlp", mlp_s, layer, attn_ar)
        tail = b.all_reduce(f"f{layer:02d}_mlp_ar", layer, mlp)
        if (layer + 1) % stage_layers == 0 and layer + 1 < layers:
            send = b.stage_transfer(f"f{layer:02d}_send", layer, mlp, activation_bytes)
            b.join(f"f{layer + 1:02d}_attn", send)

    gradients: list[str] = []
    for layer in reversed(range(layers)):
        mlp = b.compute(f"b{layer:02d}_mlp", mlp_s * BACKWARD_WORK_FACTOR, layer, tail)
        mlp_ar = b.all_reduce(f"b{layer:02d}_mlp_ar", layer, mlp)
        attn = b.compute(f"b{layer:02d}_attn", attention_s * BACKWARD_WORK_FACTOR, layer, mlp_ar)
        tail = b.all_reduce(f"b{layer:02d}_attn_ar", layer, attn)
        gradients.append(b.all_reduce(f"g{layer:02d}_grad_ar", layer, attn))
        if layer % stage_layers == 0 and layer > 0:
            send = b.stage_transfer(f"b{layer:02d}_send", layer, attn, activation_bytes)
            b.join(f"b{layer - 1:02d}_mlp", send)

    assert tail is not None
    b.compute("optimizer", OPTIMIZER_STEP_S, layers, tail)
    b.join("optimizer", *gradients)
    return b.graph()
