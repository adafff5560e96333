"""
Scale-up topologies over GPU ranks and the graph primitives shared by every other module.

A topology is an undirected simple graph whose edges are contention-free circuits. Lattice
kinds (torus/grid) lay ranks out row-major over their dimensions, last dimension fastest.
"""

from collections import Counter
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
import math
from typing import Any

import networkx as nx
import numpy as np

from src.circuit_collectives.config.logging_config import get_logger
from src.circuit_collectives.error_management.exceptions import ValidationError
from src.circuit_collectives.error_management.validator import Validator

logger = get_logger("tools.topology")

Edge = tuple[int, int]
Arc = tuple[int, int]


class TopologyKind(StrEnum):
    RING = "ring"
    TORUS2D = "torus2d"
    TORUS3D = "torus3d"
    GRID2D = "grid2d"
    GRID3D = "grid3d"
    ROUND_DERIVED = "round_derived"
    CUSTOM = "custom"


class TieBreak(StrEnum):
    """Which neighbor to step to when several lie on a shortest path."""

    LOWEST_RANK = "lowest_rank"
    HIGHEST_RANK = "highest_rank"


# kind -> (number of dimensions, wraparound)
LATTICE_KINDS: dict[TopologyKind, tuple[int, bool]] = {
    TopologyKind.RING: (1, True),
    TopologyKind.TORUS2D: (2, True),
    TopologyKind.TORUS3D: (3, True),
    TopologyKind.GRID2D: (2, False),
    TopologyKind.GRID3D: (3, False),
}


def normalize_edge(u: int, v: int) -> Edge:
    """Return the undirected edge {u, v} as an ordered pair (low, high)."""
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Topology:
    """Immutable undirected graph over ranks 0..n-1."""

    n: int
    edges: frozenset[Edge]
    kind: TopologyKind = TopologyKind.CUSTOM
    dims: tuple[int, ...] = ()
    _distances: dict[int, dict[int, int]] = field(
        default_factory=dict, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        Validator.validate_integer(self.n, "n", min_value=1)
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValidationError(
                    f"edge ({u}, {v}) is not a normalized pair of ranks below {self.n}",
                    field="edges",
                    value=(u, v),
                    context={"validation_type": "edge", "n": self.n},
                )
        if self.kind in LATTICE_KINDS and self.kind is not TopologyKind.RING:
            expected, _ = LATTICE_KINDS[self.kind]
            if len(self.dims) != expected or math.prod(self.dims) != self.n:
                raise ValidationError(
                    f"{self.kind} needs {expected} dims whose product is {self.n}",
                    field="dims",
                    value=list(self.dims),
                    context={"validation_type": "dims_product", "n": self.n},
                )
        if self.kind is TopologyKind.RING:
            degrees_ok = all(degree == 2 for _, degree in self.graph.degree())
            if (
                self.n < 3
                or len(self.edges) != self.n
                or not degrees_ok
                or not nx.is_connected(self.graph)
            ):
                raise ValidationError(
                    "ring must be a single cycle over at least 3 ranks",
                    field="edges",
                    value=len(self.edges),
                    context={"validation_type": "ring", "n": self.n},
                )

    @cached_property
    def graph(self) -> nx.Graph:
        """networkx view of the topology."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        """Sorted neighbor lists per rank."""
        neighbors: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            neighbors[u].append(v)
            neighbors[v].append(u)
        return tuple(tuple(sorted(items)) for items in neighbors)

    @cached_property
    def is_connected(self) -> bool:
        return bool(nx.is_connected(self.graph))

    def degree(self, rank: int) -> int:
        return len(self.adjacency[rank])

    def distances_to(self, dst: int) -> dict[int, int]:
        """Hop distance from every reachable rank to dst (memoized per destination)."""
        distances = self._distances.get(dst)
        if distances is None:
            distances = dict(nx.single_source_shortest_path_length(self.graph, dst))
            self._distances[dst] = distances
        return distances

    def same_graph(self, other: "Topology") -> bool:
        """Graph equality, ignoring kind and dims labels."""
        return self.n == other.n and self.edges == other.edges

    def has_edge(self, u: int, v: int) -> bool:
        return normalize_edge(u, v) in self.edges


@dataclass(frozen=True)
class PathResult:
    """Routed paths for a set of transfers, in sorted transfer order."""

    transfers: tuple[Arc, ...]
    paths: tuple[tuple[int, ...], ...]
    hops: tuple[int, ...]
    edge_usage: Mapping[Edge, int]
    arc_usage: Mapping[Arc, int]

    def __iter__(self) -> Iterator[tuple[Arc, tuple[int, ...]]]:
        return iter(zip(self.transfers, self.paths, strict=True))


def _lattice_edges(dims: tuple[int, ...], wrap: bool) -> frozenset[Edge]:
    ids = np.arange(math.prod(dims)).reshape(dims)
    pairs = []
    for axis, size in enumerate(dims):
        if wrap:
            neighbor = np.roll(ids, -1, axis=axis)
            pairs.append(np.stack([ids.ravel(), neighbor.ravel()], axis=1))
        else:
            low = np.take(ids, np.arange(size - 1), axis=axis)
            high = np.take(ids, np.arange(1, size), axis=axis)
            pairs.append(np.stack([low.ravel(), high.ravel()], axis=1))
    stacked = np.sort(np.concatenate(pairs), axis=1)
    # Size-2 wraparound folds onto the direct edge
    stacked = np.unique(stacked[stacked[:, 0] != stacked[:, 1]], axis=0)
    return frozenset((int(u), int(v)) for u, v in stacked.tolist())


def make_topology(kind: str | TopologyKind, dims: Iterable[int] | str) -> Topology:
    """
    Build one of the generated scale-up topologies.

    Grids are tori without the wraparound links; a ring is the one-dimensional torus.

    Args:
        kind: ring, torus2d, torus3d, grid2d or grid3d
        dims: Dimension sizes, each at least 2

    Returns:
        The requested topology

    Raises:
        ValidationError: If the kind or the dims are invalid
    """
    kind = TopologyKind(
        Validator.validate_choice(
            str(kind), "kind", [k.value for k in LATTICE_KINDS], case_sensitive=False
        )
    )
    n_dims, wrap = LATTICE_KINDS[kind]
    sizes = Validator.validate_dims(
        dims if isinstance(dims, str) else list(dims), "dims", expected_length=n_dims
    )
    if kind is TopologyKind.RING:
        Validator.validate_integer(sizes[0], "dims[0]", min_value=3)

    topology = Topology(
        n=math.prod(sizes), edges=_lattice_edges(sizes, wrap), kind=kind, dims=sizes
    )
    logger.debug(
        "Built topology",
        extra={"kind": kind.value, "dims": list(sizes), "edge_count": len(topology.edges)},
    )
    return topology


def _factorizations(n: int, parts: int, smallest: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        if n >= smallest:
            yield (n,)
        return
    factor = smallest
    while factor ** parts <= n:
        if n % factor == 0:
            for rest in _factorizations(n // factor, parts - 1, factor):
                yield (factor, *rest)
        factor += 1


def default_dims(kind: str | TopologyKind, n: int) -> tuple[int, ...]:
    """
    Near-equal ascending dims for n ranks (128 -> 4x4x8 in 3D, 8x16 in 2D).

    Raises:
        ValidationError: If n cannot be laid out on the kind (e.g. a prime in 2D)
    """
    kind = TopologyKind(Validator.validate_choice(str(kind), "kind", list(TopologyKind)))
    n = Validator.validate_integer(n, "n_ranks", min_value=2)
    if kind not in LATTICE_KINDS:
        raise ValidationError(
            f"{kind} has no generated layout",
            field="kind",
            value=kind.value,
            context={"validation_type": "invalid_choice"},
        )
    parts, _ = LATTICE_KINDS[kind]
    candidates = list(_factorizations(n, parts, 2))
    if not candidates:
        raise ValidationError(
            f"{n} ranks cannot be laid out as {parts} dims of size >= 2",
            field="n_ranks",
            value=n,
            context={"validation_type": "factorization", "kind": kind.value},
        )
    return min(candidates, key=lambda dims: (dims[-1] - dims[0], dims))


def make_default_topology(kind: str | TopologyKind, n: int) -> Topology:
    """Generated topology of the given kind over n ranks, using default_dims."""
    return make_topology(kind, default_dims(kind, n))


def round_topology(transfers: Iterable[Arc], n: int) -> Topology:
    """
    Topology whose edges are exactly the communicating pairs of one round.

    Opposite-direction transfers between the same pair collapse to one edge.
    """
    edges: set[Edge] = set()
    for src, dst in transfers:
        if not (0 <= src < n and 0 <= dst < n):
            raise ValidationError(
                f"transfer ({src}, {dst}) references a rank outside 0..{n - 1}",
                field="transfers",
                value=(src, dst),
                context={"validation_type": "rank_range", "n": n},
            )
        if src != dst:
            edges.add(normalize_edge(src, dst))
    return Topology(n=n, edges=frozenset(edges), kind=TopologyKind.ROUND_DERIVED)


def _check_rank(t: Topology, rank: int, field_name: str) -> None:
    if not 0 <= rank < t.n:
        raise ValidationError(
            f"{field_name} must be a rank in 0..{t.n - 1}",
            field=field_name,
            value=rank,
            context={"validation_type": "rank_range", "n": t.n},
        )


def shortest_path(
    t: Topology, src: int, dst: int, tie_break: TieBreak = TieBreak.LOWEST_RANK
) -> list[int] | None:
    """
    Minimum-hop path from src to dst, or None when they are disconnected.

    Among equal-length paths the default policy returns the lexicographically smallest one:
    at each step it moves to the lowest-ranked neighbor that is one hop closer.
    """
    _check_rank(t, src, "src")
    _check_rank(t, dst, "dst")
    if src == dst:
        return [src]
    distances = t.distances_to(dst)
    if src not in distances:
        return None

    path = [src]
    current = src
    while current != dst:
        closer = [v for v in t.adjacency[current] if distances.get(v) == distances[current] - 1]
        current = closer[0] if tie_break is TieBreak.LOWEST_RANK else closer[-1]
        path.append(current)
    return path


def route_transfers(
    t: Topology,
    transfers: Iterable[Arc],
    tie_break: TieBreak = TieBreak.LOWEST_RANK,
) -> PathResult | None:
    """
    Route every transfer on its deterministic shortest path and count link usage.

    Returns:
        Paths, hop counts, usage per undirected edge and per directed arc; None when any
        transfer has no path
    """
    ordered = tuple(sorted(transfers))
    paths: list[tuple[int, ...]] = []
    edge_usage: Counter[Edge] = Counter()
    arc_usage: Counter[Arc] = Counter()
    for src, dst in ordered:
        path = shortest_path(t, src, dst, tie_break)
        if path is None:
            logger.debug("Transfer has no path", extra={"src": src, "dst": dst})
            return None
        for u, v in zip(path, path[1:], strict=False):
            edge_usage[normalize_edge(u, v)] += 1
            arc_usage[(u, v)] += 1
        paths.append(tuple(path))
    return PathResult(
        transfers=ordered,
        paths=tuple(paths),
        hops=tuple(len(path) - 1 for path in paths),
        edge_usage=dict(edge_usage),
        arc_usage=dict(arc_usage),
    )


def topology_to_dict(t: Topology) -> dict[str, Any]:
    """JSON form: {"n", "kind", "dims", "edges"} with edges sorted."""
    return {
        "n": t.n,
        "kind": t.kind.value,
        "dims": list(t.dims),
        "edges": [list(edge) for edge in sorted(t.edges)],
    }


def topology_from_dict(data: Any) -> Topology:
    """
    Load a topology from its JSON form, validating every invariant.

    Raises:
        ValidationError: If the document is malformed or violates an invariant
    """
    data = Validator.validate_dict(data, "topology", required_keys=["n", "edges"])
    n = Validator.validate_integer(data["n"], "n", min_value=1)
    kind = TopologyKind(
        Validator.validate_choice(
            data.get("kind", TopologyKind.CUSTOM.value), "kind", list(TopologyKind)
        )
    )
    dims = tuple(
        Validator.validate_integer(size, f"dims[{i}]", min_value=2)
        for i, size in enumerate(Validator.validate_sequence(data.get("dims", []), "dims"))
    )

    edges: set[Edge] = set()
    for i, item in enumerate(Validator.validate_sequence(data["edges"], "edges")):
        pair = Validator.validate_sequence(item, f"edges[{i}]", min_length=2)
        u = Validator.validate_integer(pair[0], f"edges[{i}][0]", min_value=0)
        v = Validator.validate_integer(pair[1], f"edges[{i}][1]", min_value=0)
        if u == v:
            raise ValidationError(
                f"edges[{i}] is a self-loop",
                field=f"edges[{i}]",
                value=[u, v],
                context={"validation_type": "self_loop"},
            )
        edge = normalize_edge(u, v)
        if edge in edges:
            raise ValidationError(
                f"edges[{i}] duplicates an earlier edge",
                field=f"edges[{i}]",
                value=[u, v],
                context={"validation_type": "duplicate_edge"},
            )
        edges.add(edge)
    return Topology(n=n, edges=frozenset(edges), kind=kind, dims=dims)
