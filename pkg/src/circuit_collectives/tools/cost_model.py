"""
Extended alpha-beta cost model with congestion and dilation.

A round costs alpha * dilation + beta * congestion * w, where dilation is the longest routed
path and congestion the heaviest-loaded link. Rounds are barriers, so a schedule costs the
sum of its rounds.
"""

from dataclasses import dataclass, replace
from functools import lru_cache
import math

from src.circuit_collectives.config.logging_config import get_logger
from src.circuit_collectives.config.sim_constants import (
    ALPHA_S,
    BETA_S_PER_BYTE,
    DIRECTED_EDGE_CAPACITY,
    DISCONNECT_PENALTY_S,
    RECONF_DELAY_S,
)
from src.circuit_collectives.error_management.exceptions import ValidationError
from src.circuit_collectives.error_management.validator import Validator
from src.circuit_collectives.tools.collectives import Schedule, TransferSet
from src.circuit_collectives.tools.topology import Topology, TopologyKind, route_transfers

logger = get_logger("tools.cost_model")


@dataclass(frozen=True)
class CostParams:
    """Cost coefficients: alpha (s per transfer), beta (s per byte), reconfiguration delay."""

    alpha: float = ALPHA_S
    beta: float = BETA_S_PER_BYTE
    reconf_delay: float = RECONF_DELAY_S
    disconnect_penalty: float = DISCONNECT_PENALTY_S
    directed_edge_capacity: bool = DIRECTED_EDGE_CAPACITY

    def __post_init__(self) -> None:
        Validator.validate_number(self.alpha, "alpha", min_value=0.0)
        Validator.validate_number(self.beta, "beta", min_value=0.0)
        Validator.validate_number(self.reconf_delay, "reconf_delay", min_value=0.0)
        Validator.validate_number(
            self.disconnect_penalty, "disconnect_penalty", min_value=0.0, exclusive_min=True
        )

    def with_reconf_delay(self, reconf_delay: float) -> "CostParams":
        return replace(self, reconf_delay=reconf_delay)


@dataclass(frozen=True)
class RoundCost:
    """Cost of one round on one topology."""

    dilation: int
    congestion: int
    time: float
    connected: bool
    alpha_term: float = 0.0
    beta_term: float = 0.0


@dataclass(frozen=True)
class ScheduleCost:
    total_time: float
    per_round: tuple[RoundCost, ...]

    @property
    def alpha_time(self) -> float:
        return math.fsum(cost.alpha_term for cost in self.per_round)

    @property
    def beta_time(self) -> float:
        return math.fsum(cost.beta_term for cost in self.per_round)


@lru_cache(maxsize=1 << 16)
def path_load(t: Topology, transfers: TransferSet, directed: bool) -> tuple[int, int] | None:
    """(dilation, congestion) of a round on t, or None when some transfer has no path."""
    result = route_transfers(t, transfers)
    if result is None:
        return None
    usage = result.arc_usage if directed else result.edge_usage
    return max(result.hops, default=0), max(usage.values(), default=0)


def counts_per_direction(t: Topology, p: CostParams) -> bool:
    """
    Whether link load is counted per direction on t.

    Round-derived topologies are made of one unidirectional circuit per transfer direction;
    fixed topologies share each link between both directions unless configured otherwise.
    """
    return p.directed_edge_capacity or t.kind is TopologyKind.ROUND_DERIVED


def round_cost(t: Topology, transfers: TransferSet, w: float, p: CostParams) -> RoundCost:
    """
    Cost of one round of transfers of w bytes each on topology t.

    Every transfer follows the deterministic shortest path. A round with an unroutable
    transfer is disconnected and costs the disconnect penalty.

    Raises:
        ValidationError: If a transfer references a rank outside the topology
    """
    if transfers.max_rank >= t.n:
        raise ValidationError(
            f"round references rank {transfers.max_rank} on a {t.n}-rank topology",
            field="transfers",
            value=transfers.max_rank,
            context={"validation_type": "rank_range", "n": t.n},
        )
    load = path_load(t, transfers, counts_per_direction(t, p))
    if load is None:
        return RoundCost(dilation=0, congestion=0, time=p.disconnect_penalty, connected=False)

    dilation, congestion = load
    alpha_term = p.alpha * dilation
    beta_term = p.beta * congestion * w
    return RoundCost(
        dilation=dilation,
        congestion=congestion,
        time=alpha_term + beta_term,
        connected=True,
        alpha_term=alpha_term,
        beta_term=beta_term,
    )


def schedule_cost(t: Topology, s: Schedule, p: CostParams) -> ScheduleCost:
    """Cost of running schedule s on the fixed topology t (no reconfiguration)."""
    if s.n_ranks > t.n:
        raise ValidationError(
            f"schedule spans {s.n_ranks} ranks but the topology has {t.n}",
            field="n_ranks",
            value=s.n_ranks,
            context={"validation_type": "rank_range", "n": t.n},
        )
    per_round = tuple(round_cost(t, transfers, size, p) for transfers, size in s)
    total = math.fsum(cost.time for cost in per_round)
    logger.debug(
        "Schedule cost",
        extra={
            "algorithm": s.algorithm.value,
            "primitive": s.primitive.value,
            "topology": t.kind.value,
            "total_s": total,
        },
    )
    return ScheduleCost(total_time=total, per_round=per_round)


def effective_bandwidth(link_bw: float, overlaps: int) -> float:
    """Bandwidth each of `overlaps` transfers sharing one link gets."""
    overlaps = Validator.validate_integer(overlaps, "overlaps", min_value=1)
    return Validator.validate_number(link_bw, "link_bw", min_value=0.0) / overlaps


def direct_circuit_cost(num_bytes: float, p: CostParams) -> float:
    """One transfer over a dedicated circuit."""
    return p.alpha + p.beta * num_bytes


def ideal_cost(s: Schedule, p: CostParams) -> float:
    """Cost of s with every round on a contention-free, one-hop fabric."""
    return math.fsum(direct_circuit_cost(size, p) for size in s.sizes)
