"""
Inter-server fiber planning.

Circuits between servers are routed on the server graph so that the largest per-link
circuit count z, which is the number of fibers each link needs, is as small as possible.
Links are undirected fibers: a circuit in either direction adds one to the link's load.

Small instances are solved by exhaustive branch and bound over simple paths. Larger ones use
a binary search on z whose feasibility check is a negotiated-congestion rip-up-and-reroute;
the returned z always comes with a witness routing and is proven optimal when it meets the
lower bound.
"""

from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from itertools import islice
import math
from typing import Any

import networkx as nx
import numpy as np

from src.circuit_collectives.config.error_constants import ERROR_DISCONNECTED_REQUEST
from src.circuit_collectives.config.logging_config import get_logger
from src.circuit_collectives.config.routing_constants import (
    DEFAULT_SEED,
    FIBER_EXHAUSTIVE_MAX_COMBINATIONS,
    FIBER_EXHAUSTIVE_MAX_REQUESTS,
    FIBER_EXHAUSTIVE_MAX_SERVERS,
    FIBER_HISTORY_WEIGHT,
    FIBER_OVERFLOW_PENALTY,
    FIBER_SEARCH_ITERATIONS,
    FIBER_SEARCH_RESTARTS,
)
from src.circuit_collectives.error_management.exceptions import InfeasibleError, ValidationError
from src.circuit_collectives.error_management.validator import Validator

logger = get_logger("tools.fiber_planner")

Link = tuple[int, int]
Arc = tuple[int, int]
Request = tuple[int, int]

METHOD_EXHAUSTIVE = "exhaustive"
METHOD_SEARCH = "search"


def link_of(u: int, v: int) -> Link:
    return (u, v) if u < v else (v, u)


def _path_links(path: Sequence[int]) -> list[Link]:
    return [link_of(u, v) for u, v in zip(path, path[1:], strict=False)]


class ServerGraph:
    """Servers joined by fiber links, with circuits already present on each link."""

    def __init__(
        self,
        graph: nx.Graph,
        edge_count: Mapping[Link, int] | None = None,
        grid_shape: tuple[int, int] | None = None,
    ):
        self.graph = graph
        self.grid_shape = grid_shape
        self.edge_count: dict[Link, int] = {}
        for (u, v), count in (edge_count or {}).items():
            if not graph.has_edge(u, v):
                raise ValidationError(
                    f"edge_count names a missing link ({u}, {v})",
                    field="edge_count",
                    value=[u, v],
                    context={"validation_type": "missing_link"},
                )
            self.edge_count[link_of(u, v)] = Validator.validate_integer(
                count, f"edge_count[{u},{v}]", min_value=0
            )

    @classmethod
    def grid(
        cls, rows: int, cols: int, edge_count: Mapping[Link, int] | None = None
    ) -> "ServerGraph":
        """rows x cols server grid; server (r, c) is numbered r * cols + c."""
        rows = Validator.validate_integer(rows, "rows", min_value=1)
        cols = Validator.validate_integer(cols, "cols", min_value=1)
        graph = nx.convert_node_labels_to_integers(
            nx.grid_2d_graph(rows, cols), ordering="sorted"
        )
        return cls(graph, edge_count, grid_shape=(rows, cols))

    @classmethod
    def from_links(
        cls, servers: int, links: Iterable[Link], edge_count: Mapping[Link, int] | None = None
    ) -> "ServerGraph":
        graph = nx.Graph()
        graph.add_nodes_from(range(servers))
        graph.add_edges_from(links)
        return cls(graph, edge_count)

    @property
    def servers(self) -> list[int]:
        return sorted(self.graph.nodes)

    @property
    def links(self) -> list[Link]:
        return sorted(link_of(u, v) for u, v in self.graph.edges)

    def existing(self, link: Link) -> int:
        return self.edge_count.get(link, 0)


@dataclass(frozen=True)
class FiberPlan:
    """
    Routing of every request with its per-request arc indicators and the fiber count z.

    `arcs[i]` holds the directed arcs request i uses (the x variables); `paths[i]` is the
    decoded node path.
    """

    arcs: tuple[frozenset[Arc], ...]
    paths: tuple[tuple[int, ...], ...]
    z: int
    loads: dict[Link, int] = field(default_factory=dict)
    lower_bound: int = 0
    method: str = METHOD_SEARCH
    proven_optimal: bool = False


def _loads(g: ServerGraph, paths: Iterable[Sequence[int]]) -> Counter[Link]:
    loads: Counter[Link] = Counter(g.edge_count)
    for path in paths:
        loads.update(_path_links(path))
    return loads


def _make_plan(
    g: ServerGraph,
    paths: Sequence[Sequence[int]],
    lower_bound: int,
    method: str,
) -> FiberPlan:
    loads = _loads(g, paths)
    z = max(loads.values(), default=0)
    return FiberPlan(
        arcs=tuple(frozenset(zip(path, path[1:], strict=False)) for path in paths),
        paths=tuple(tuple(path) for path in paths),
        z=z,
        loads={link: count for link, count in sorted(loads.items()) if count},
        lower_bound=lower_bound,
        method=method,
        proven_optimal=method == METHOD_EXHAUSTIVE or z <= lower_bound,
    )


def lower_bound(g: ServerGraph, requests: Sequence[Request]) -> int:
    """
    Lower bound on z from existing counts, per-server degree and (for grids) axis cuts.

    Every request leaves its source through one incident link and crosses every cut that
    separates its endpoints.
    """
    bound = max(g.edge_count.values(), default=0)

    endpoint_demand: Counter[int] = Counter()
    for src, dst in requests:
        endpoint_demand[src] += 1
        endpoint_demand[dst] += 1
    for server, demand in endpoint_demand.items():
        incident = [link_of(server, other) for other in g.graph.neighbors(server)]
        if incident:
            total = demand + sum(g.existing(link) for link in incident)
            bound = max(bound, math.ceil(total / len(incident)))

    if g.grid_shape is not None:
        rows, cols = g.grid_shape
        # Cuts between columns c and c+1, then between rows r and r+1
        for c in range(cols - 1):
            crossing = sum((s % cols <= c) != (d % cols <= c) for s, d in requests)
            cut = [link_of(r * cols + c, r * cols + c + 1) for r in range(rows)]
            bound = max(bound, _cut_bound(g, crossing, cut))
        for r in range(rows - 1):
            crossing = sum((s // cols <= r) != (d // cols <= r) for s, d in requests)
            cut = [link_of(r * cols + c, (r + 1) * cols + c) for c in range(cols)]
            bound = max(bound, _cut_bound(g, crossing, cut))
    return bound


def _cut_bound(g: ServerGraph, crossing: int, cut: Sequence[Link]) -> int:
    return math.ceil((crossing + sum(g.existing(link) for link in cut)) / len(cut))


def _exhaustive_candidates(
    g: ServerGraph, requests: Sequence[Request]
) -> list[list[list[int]]] | None:
    """All simple paths per request, or None if the combination count is too large."""
    if (
        g.graph.number_of_nodes() > FIBER_EXHAUSTIVE_MAX_SERVERS
        or len(requests) > FIBER_EXHAUSTIVE_MAX_REQUESTS
    ):
        return None
    candidates: list[list[list[int]]] = []
    combinations = 1
    for src, dst in requests:
        limit = FIBER_EXHAUSTIVE_MAX_COMBINATIONS // combinations + 1
        paths = [list(path) for path in islice(nx.all_simple_paths(g.graph, src, dst), limit)]
        combinations *= len(paths)
        if combinations > FIBER_EXHAUSTIVE_MAX_COMBINATIONS:
            return None
        candidates.append(sorted(paths, key=lambda path: (len(path), path)))
    return candidates


def _solve_exhaustive(
    g: ServerGraph, requests: Sequence[Request], candidates: list[list[list[int]]], bound: int
) -> list[list[int]]:
    order = sorted(range(len(requests)), key=lambda i: (len(candidates[i]), i))
    loads: Counter[Link] = Counter(g.edge_count)
    chosen: dict[int, list[int]] = {}
    best_z = math.inf
    best: dict[int, list[int]] = {}

    def descend(depth: int, current: int) -> None:
        nonlocal best_z, best
        if current >= best_z or best_z <= bound:
            return
        if depth == len(order):
            best_z, best = current, dict(chosen)
            return
        index = order[depth]
        for path in candidates[index]:
            links = _path_links(path)
            loads.update(links)
            chosen[index] = path
            descend(depth + 1, max(current, *(loads[link] for link in links)))
            loads.subtract(links)
            del chosen[index]

    descend(0, max(g.edge_count.values(), default=0))
    return [best[i] for i in range(len(requests))]


def _initial_routing(g: ServerGraph, requests: Sequence[Request]) -> list[list[int]]:
    """Sequential routing, each request avoiding links the earlier ones loaded."""
    loads: Counter[Link] = Counter(g.edge_count)

    def weight(u: int, v: int, _data: dict[str, Any]) -> float:
        return 1.0 + loads[link_of(u, v)]

    paths = []
    for src, dst in requests:
        path = list(nx.dijkstra_path(g.graph, src, dst, weight=weight))
        loads.update(_path_links(path))
        paths.append(path)
    return paths


def _negotiate(
    g: ServerGraph,
    requests: Sequence[Request],
    z: int,
    start: Sequence[Sequence[int]],
    rng: np.random.Generator,
    iterations: int,
) -> list[list[int]] | None:
    """
    Rip up and reroute requests on overflowing links until every load is at most z.

    Link cost grows with a history term on links that keep overflowing and a penalty on
    links that would overflow, so requests negotiate who keeps the scarce links.
    """
    paths = [list(path) for path in start]
    loads = _loads(g, paths)
    history: defaultdict[Link, float] = defaultdict(float)

    def weight(u: int, v: int, _data: dict[str, Any]) -> float:
        link = link_of(u, v)
        overflow = max(0, loads[link] + 1 - z)
        return 1.0 + history[link] + FIBER_OVERFLOW_PENALTY * overflow

    for _ in range(iterations):
        overflowing = {link for link, count in loads.items() if count > z}
        if not overflowing:
            return paths
        for link in overflowing:
            history[link] += FIBER_HISTORY_WEIGHT
        victims = [
            i for i, path in enumerate(paths) if overflowing.intersection(_path_links(path))
        ]
        for i in rng.permutation(victims).tolist():
            loads.subtract(_path_links(paths[i]))
            src, dst = requests[i]
            paths[i] = list(nx.dijkstra_path(g.graph, src, dst, weight=weight))
            loads.update(_path_links(paths[i]))

    if all(count <= z for count in loads.values()):
        return paths
    return None


def _feasible(
    g: ServerGraph,
    requests: Sequence[Request],
    z: int,
    start: Sequence[Sequence[int]],
    rng: np.random.Generator,
    iterations: int,
    restarts: int,
) -> list[list[int]] | None:
    if max(g.edge_count.values(), default=0) > z:
        return None
    for attempt in range(restarts + 1):
        paths = _negotiate(g, requests, z, start, rng, iterations)
        if paths is not None:
            logger.debug("Fiber count feasible", extra={"z": z, "attempt": attempt})
            return paths
    return None


def _validate_requests(g: ServerGraph, requests: Iterable[Request]) -> list[Request]:
    checked: list[Request] = []
    for index, pair in enumerate(requests):
        src, dst = (int(pair[0]), int(pair[1]))
        for name, server in (("src", src), ("dst", dst)):
            if server not in g.graph:
                raise ValidationError(
                    f"requests[{index}].{name} {server} is not a server",
                    field=f"requests[{index}].{name}",
                    value=server,
                    context={"validation_type": "unknown_server"},
                )
        if src == dst:
            raise ValidationError(
                f"requests[{index}] starts and ends at server {src}",
                field=f"requests[{index}]",
                value=[src, dst],
                context={"validation_type": "self_request"},
            )
        if not nx.has_path(g.graph, src, dst):
            raise InfeasibleError(ERROR_DISCONNECTED_REQUEST % (src, dst), request=(src, dst))
        checked.append((src, dst))
    return checked


def plan_fibers(
    g: ServerGraph,
    requests: Iterable[Request],
    seed: int = DEFAULT_SEED,
    iterations: int = FIBER_SEARCH_ITERATIONS,
    restarts: int = FIBER_SEARCH_RESTARTS,
) -> FiberPlan:
    """
    Route every request so the maximum link load z is minimal.

    Args:
        g: Server graph with existing circuit counts
        requests: (src, dst) server pairs
        seed: Seed for the reroute order of the search
        iterations: Reroute rounds per feasibility check
        restarts: Extra attempts per check before it is declared infeasible

    Returns:
        Plan with witness paths; method and proven_optimal say how far z is certified

    Raises:
        ValidationError: On unknown servers or src == dst
        InfeasibleError: If some request's endpoints are disconnected
    """
    checked = _validate_requests(g, requests)
    bound = lower_bound(g, checked)
    if not checked:
        return _make_plan(g, [], bound, METHOD_EXHAUSTIVE)

    candidates = _exhaustive_candidates(g, checked)
    if candidates is not None:
        result = _make_plan(
            g, _solve_exhaustive(g, checked, candidates, bound), bound, METHOD_EXHAUSTIVE
        )
        logger.info(
            "Fiber plan (exhaustive)", extra={"requests": len(checked), "z": result.z}
        )
        return result

    rng = np.random.default_rng(seed)
    witness = _initial_routing(g, checked)
    low, high = bound, max(_loads(g, witness).values(), default=0)
    while low < high:
        mid = (low + high) // 2
        paths = _feasible(g, checked, mid, witness, rng, iterations, restarts)
        if paths is None:
            low = mid + 1
        else:
            witness, high = paths, max(_loads(g, paths).values(), default=0)

    result = _make_plan(g, witness, bound, METHOD_SEARCH)
    if not result.proven_optimal:
        logger.warning(
            "Fiber search stopped above the lower bound",
            extra={"z": result.z, "lower_bound": bound, "iterations": iterations},
        )
    logger.info(
        "Fiber plan (search)",
        extra={"requests": len(checked), "z": result.z, "lower_bound": bound},
    )
    return result


def verify_plan(g: ServerGraph, requests: Sequence[Request], plan: FiberPlan) -> bool:
    """
    Check the plan's arc indicators against the routing constraints.

    Per request the source emits one unit and absorbs none, the destination absorbs one
    and emits none, and intermediate servers conserve flow. Every used arc must be a link,
    and z must cover each link's load including existing circuits.
    """
    if len(plan.arcs) != len(requests):
        return False
    loads: Counter[Link] = Counter(g.edge_count)
    for (src, dst), arcs in zip(requests, plan.arcs, strict=True):
        outflow: Counter[int] = Counter()
        inflow: Counter[int] = Counter()
        for u, v in arcs:
            if not g.graph.has_edge(u, v):
                return False
            outflow[u] += 1
            inflow[v] += 1
            loads[link_of(u, v)] += 1
        if outflow[src] != 1 or inflow[src] != 0:
            return False
        if inflow[dst] != 1 or outflow[dst] != 0:
            return False
        for server in set(outflow) | set(inflow):
            if server not in (src, dst) and outflow[server] != inflow[server]:
                return False
    return all(plan.z >= count for count in loads.values())


@dataclass(frozen=True)
class WavelengthFiberPlan:
    """Independent plans per wavelength channel; links need the largest per-channel z."""

    plans: dict[int, FiberPlan]
    loads: dict[Link, int]

    @property
    def fibers(self) -> int:
        return max((plan.z for plan in self.plans.values()), default=0)


def plan_fibers_by_wavelength(
    g: ServerGraph, requests: Iterable[tuple[int, int, int]], seed: int = DEFAULT_SEED
) -> WavelengthFiberPlan:
    """
    Plan each wavelength's (src, dst, wavelength) requests separately.

    Existing circuits count once in the combined loads, not once per wavelength.
    """
    by_wavelength: defaultdict[int, list[Request]] = defaultdict(list)
    for src, dst, wavelength in requests:
        by_wavelength[int(wavelength)].append((src, dst))

    plans = {
        wavelength: plan_fibers(g, pairs, seed=seed)
        for wavelength, pairs in sorted(by_wavelength.items())
    }
    loads: Counter[Link] = Counter(g.edge_count)
    for plan in plans.values():
        for path in plan.paths:
            loads.update(_path_links(path))
    return WavelengthFiberPlan(plans=plans, loads=dict(sorted(loads.items())))


def random_requests(servers: int, count: int, seed: int = DEFAULT_SEED) -> list[Request]:
    """Uniform endpoint pairs drawn with replacement, never src == dst."""
    servers = Validator.validate_integer(servers, "servers", min_value=2)
    count = Validator.validate_integer(count, "count", min_value=0)
    rng = np.random.default_rng(seed)
    pairs: list[Request] = []
    for _ in range(count):
        src, dst = rng.choice(servers, size=2, replace=False).tolist()
        pairs.append((src, dst))
    return pairs


def plan_to_dict(plan: FiberPlan) -> dict[str, Any]:
    return {
        "z": plan.z,
        "lower_bound": plan.lower_bound,
        "method": plan.method,
        "proven_optimal": plan.proven_optimal,
        "paths": [list(path) for path in plan.paths],
        "loads": [[u, v, count] for (u, v), count in plan.loads.items()],
    }
