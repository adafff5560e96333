"""
Circuit routing over an intra-server MZI mesh.

The mesh is a 4-neighbor grid whose edges are waveguide segments. Circuits are unidirectional,
so by default each direction of a segment is a separate lane; a lane carries at most
max_overlap circuits of the same wavelength. Requests are routed in order on weighted shortest
paths; when a path would overuse a lane the weights of its overused segments are multiplied and
the search is retried, up to `trials` times per request. The last trial skips full lanes, so a
request stays unrouted only when no free path is left.
"""

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from itertools import islice
from typing import Any

import networkx as nx
import numpy as np

from src.circuit_collectives.config.logging_config import LoggerMixin, get_logger
from src.circuit_collectives.config.routing_constants import (
    DEFAULT_SEED,
    MESH_BASE_WEIGHT,
    MESH_DIRECTED_WAVEGUIDES,
    MESH_MAX_OVERLAP,
    MESH_PENALIZE_FACTOR,
    MESH_SEARCH_K_SHORTEST,
    MESH_SEARCH_PENALIZE,
    MESH_TRIALS,
)
from src.circuit_collectives.error_management.exceptions import ValidationError
from src.circuit_collectives.error_management.validator import Validator

logger = get_logger("tools.mesh_router")

Node = tuple[int, int]
MeshEdge = tuple[Node, Node]
# (from, to) when lanes are directed, otherwise the normalized edge
Lane = tuple[Node, Node]


def mesh_edge(u: Node, v: Node) -> MeshEdge:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class RouteRequest:
    """Circuit from src to dst (row, col) MZIs on one wavelength channel."""

    src: Node
    dst: Node
    wavelength: int = 0


@dataclass(frozen=True)
class RouteResult:
    request: RouteRequest
    path: tuple[Node, ...]
    valid: bool
    trials_used: int = 0

    @property
    def edges(self) -> list[MeshEdge]:
        return [mesh_edge(u, v) for u, v in zip(self.path, self.path[1:], strict=False)]


@dataclass(frozen=True)
class MeshRouting:
    routes: tuple[RouteResult, ...]
    edge_counts: dict[tuple[Lane, int], int]

    @property
    def unrouted(self) -> tuple[RouteRequest, ...]:
        return tuple(route.request for route in self.routes if not route.valid)

    @property
    def routed_fraction(self) -> float:
        if not self.routes:
            return 1.0
        return sum(route.valid for route in self.routes) / len(self.routes)


class MeshGraph(LoggerMixin):
    """MZI grid with per-(waveguide, wavelength) circuit counts and routing weights."""

    def __init__(
        self,
        width: int,
        height: int,
        base_weight: float = MESH_BASE_WEIGHT,
        directed: bool = MESH_DIRECTED_WAVEGUIDES,
    ):
        self.width = Validator.validate_integer(width, "width", min_value=1)
        self.height = Validator.validate_integer(height, "height", min_value=1)
        self.base_weight = Validator.validate_number(
            base_weight, "base_weight", min_value=0.0, exclusive_min=True
        )
        self.directed = Validator.validate_boolean(directed, "directed")
        self.graph: nx.Graph = nx.grid_2d_graph(self.height, self.width)
        nx.set_edge_attributes(self.graph, self.base_weight, "weight")
        self.edge_counts: Counter[tuple[Lane, int]] = Counter()

    def lane(self, u: Node, v: Node) -> Lane:
        return (u, v) if self.directed else mesh_edge(u, v)

    def lanes(self, path: Sequence[Node]) -> list[Lane]:
        return [self.lane(u, v) for u, v in zip(path, path[1:], strict=False)]

    @property
    def weights(self) -> dict[MeshEdge, float]:
        return {mesh_edge(u, v): data["weight"] for u, v, data in self.graph.edges(data=True)}

    def contains(self, node: Node) -> bool:
        return 0 <= node[0] < self.height and 0 <= node[1] < self.width

    def check_node(self, node: Node, field_name: str) -> Node:
        node = (int(node[0]), int(node[1]))
        if not self.contains(node):
            raise ValidationError(
                f"{field_name} {node} is off the {self.width}x{self.height} mesh",
                field=field_name,
                value=list(node),
                context={"validation_type": "off_grid"},
            )
        return node

    def scale_weights(self, edges: Iterable[MeshEdge], factor: float) -> None:
        for u, v in edges:
            self.graph[u][v]["weight"] *= factor

    def is_full(self, u: Node, v: Node, wavelength: int, max_overlap: int) -> bool:
        return self.edge_counts[(self.lane(u, v), wavelength)] >= max_overlap

    def overused(self, path: Sequence[Node], wavelength: int, max_overlap: int) -> list[MeshEdge]:
        """Segments of path whose lane would exceed max_overlap if the path were committed."""
        return [
            mesh_edge(u, v)
            for u, v in zip(path, path[1:], strict=False)
            if self.is_full(u, v, wavelength, max_overlap)
        ]

    def commit(self, path: Sequence[Node], wavelength: int, penalize_factor: float) -> None:
        for lane in self.lanes(path):
            self.edge_counts[(lane, wavelength)] += 1
        self.scale_weights(
            (mesh_edge(u, v) for u, v in zip(path, path[1:], strict=False)), penalize_factor
        )

    def shortest_path(
        self, src: Node, dst: Node, skip_full: tuple[int, int] | None = None
    ) -> list[Node] | None:
        """
        A* path on the current weights, or None when dst cannot be reached.

        skip_full=(wavelength, max_overlap) leaves out lanes that are already full.
        """

        def manhattan(a: Node, b: Node) -> float:
            return self.base_weight * (abs(a[0] - b[0]) + abs(a[1] - b[1]))

        def weight(u: Node, v: Node, data: dict[str, Any]) -> float | None:
            if skip_full is not None and self.is_full(u, v, *skip_full):
                return None
            return float(data["weight"])

        try:
            return list(nx.astar_path(self.graph, src, dst, heuristic=manhattan, weight=weight))
        except nx.NetworkXNoPath:
            return None

    def candidate_paths(self, src: Node, dst: Node, limit: int) -> list[list[Node]]:
        """Up to limit simple paths in increasing weight order."""
        paths = nx.shortest_simple_paths(self.graph, src, dst, weight="weight")
        return [list(path) for path in islice(paths, limit)]


def _route_one(
    g: MeshGraph,
    request: RouteRequest,
    max_overlap: int,
    penalize_factor: float,
    trials: int,
    search: str,
) -> RouteResult:
    if request.src == request.dst:
        return RouteResult(request=request, path=(request.src,), valid=True)

    if search == MESH_SEARCH_K_SHORTEST:
        for attempt, path in enumerate(g.candidate_paths(request.src, request.dst, trials), 1):
            if not g.overused(path, request.wavelength, max_overlap):
                g.commit(path, request.wavelength, penalize_factor)
                return RouteResult(request, tuple(path), valid=True, trials_used=attempt)
        return RouteResult(request, (), valid=False, trials_used=trials)

    for attempt in range(1, trials + 1):
        last = attempt == trials
        path = g.shortest_path(
            request.src, request.dst, (request.wavelength, max_overlap) if last else None
        )
        if path is None:
            break
        overused = g.overused(path, request.wavelength, max_overlap)
        if not overused:
            g.commit(path, request.wavelength, penalize_factor)
            return RouteResult(request, tuple(path), valid=True, trials_used=attempt)
        g.scale_weights(overused, penalize_factor)
    return RouteResult(request, (), valid=False, trials_used=trials)


def route_all(
    g: MeshGraph,
    pairs: Sequence[RouteRequest],
    max_overlap: int = MESH_MAX_OVERLAP,
    penalize_factor: float = MESH_PENALIZE_FACTOR,
    trials: int = MESH_TRIALS,
    search: str = MESH_SEARCH_PENALIZE,
) -> MeshRouting:
    """
    Route requests in order, committing each valid path onto the mesh.

    Args:
        g: Mesh to route on; its counts and weights are updated in place
        pairs: Requests, routed in the given order
        max_overlap: Circuits of one wavelength a waveguide may carry
        penalize_factor: Weight multiplier for overused and committed edges
        trials: Path searches per request
        search: "penalize" re-searches after penalizing overused edges, "k_shortest"
            walks simple paths in weight order

    Returns:
        One result per request (unrouted ones have valid=False) and the final edge counts

    Raises:
        ValidationError: On off-grid endpoints or invalid limits
    """
    max_overlap = Validator.validate_integer(max_overlap, "max_overlap", min_value=1)
    trials = Validator.validate_integer(trials, "trials", min_value=1)
    penalize_factor = Validator.validate_number(
        penalize_factor, "penalize_factor", min_value=1.0, exclusive_min=True
    )
    search = Validator.validate_choice(
        search, "search", [MESH_SEARCH_PENALIZE, MESH_SEARCH_K_SHORTEST]
    )
    requests = [
        RouteRequest(
            src=g.check_node(request.src, "src"),
            dst=g.check_node(request.dst, "dst"),
            wavelength=Validator.validate_integer(request.wavelength, "wavelength", min_value=0),
        )
        for request in pairs
    ]

    routes = [
        _route_one(g, request, max_overlap, penalize_factor, trials, search)
        for request in requests
    ]
    routing = MeshRouting(routes=tuple(routes), edge_counts=dict(g.edge_counts))
    for request in routing.unrouted:
        logger.warning(
            "Request left unrouted",
            extra={"src": list(request.src), "dst": list(request.dst), "trials": trials},
        )
    logger.info(
        "Mesh routing finished",
        extra={"requests": len(routes), "unrouted": len(routing.unrouted), "search": search},
    )
    return routing


def validate_routes(
    g: MeshGraph, routes: Iterable[RouteResult], max_overlap: int = MESH_MAX_OVERLAP
) -> bool:
    """
    Check committed routes from scratch: each is a connected mesh path between its
    endpoints and no (lane, wavelength) carries more than max_overlap circuits.
    """
    counts: Counter[tuple[Lane, int]] = Counter()
    for route in routes:
        if not route.valid:
            continue
        path = route.path
        if not path or path[0] != route.request.src or path[-1] != route.request.dst:
            return False
        if not all(g.contains(node) for node in path):
            return False
        for u, v in zip(path, path[1:], strict=False):
            if not g.graph.has_edge(u, v):
                return False
            counts[(g.lane(u, v), route.request.wavelength)] += 1
    return all(count <= max_overlap for count in counts.values())


def random_requests(
    width: int,
    height: int,
    count: int,
    wavelengths: int = 1,
    seed: int = DEFAULT_SEED,
) -> list[RouteRequest]:
    """Uniformly random requests between distinct MZIs."""
    if width * height < 2:
        raise ValidationError(
            "mesh needs at least two MZIs to draw requests",
            field="mesh",
            value=[width, height],
            context={"validation_type": "min_value"},
        )
    rng = np.random.default_rng(seed)
    requests: list[RouteRequest] = []
    while len(requests) < count:
        src, dst = rng.choice(width * height, size=2, replace=False).tolist()
        requests.append(
            RouteRequest(
                src=divmod(src, width),
                dst=divmod(dst, width),
                wavelength=int(rng.integers(wavelengths)),
            )
        )
    return requests


def request_from_dict(data: Any) -> RouteRequest:
    data = Validator.validate_dict(data, "request", required_keys=["src", "dst"])
    endpoints = []
    for name in ("src", "dst"):
        row, col = Validator.validate_sequence(data[name], name, min_length=2)[:2]
        endpoints.append(
            (
                Validator.validate_integer(row, f"{name}[0]"),
                Validator.validate_integer(col, f"{name}[1]"),
            )
        )
    wavelength = Validator.validate_integer(data.get("wavelength", 0), "wavelength", min_value=0)
    return RouteRequest(src=endpoints[0], dst=endpoints[1], wavelength=wavelength)
