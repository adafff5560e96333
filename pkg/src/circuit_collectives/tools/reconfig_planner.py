"""
Reconfiguration scheduling: decide per round whether to keep the current topology, switch to
the topology derived from the round's own transfers, or switch to a standard topology.

Topology indices: 0 is the initial topology g0, 1..|S| the standard set and |S|+1+k the
topology derived from round k. A derived topology can only be adopted at its own round and
held afterwards. Switching to a different graph costs the reconfiguration delay r.

The exact solver is a dynamic program over fabric states. Costs are compared as exact
rationals so that equal-cost plans are recognized as equal regardless of summation order.
"""

from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
import math

from src.circuit_collectives.config.error_constants import ERROR_CONFIG_PENALTY_TOO_SMALL
from src.circuit_collectives.config.logging_config import get_logger
from src.circuit_collectives.config.sim_constants import PLANNER_CANDIDATES, RX_PER_GPU, TX_PER_GPU
from src.circuit_collectives.error_management.exceptions import (
    ConfigurationError,
    InstanceTooLargeError,
    UnsupportedError,
    ValidationError,
)
from src.circuit_collectives.error_management.validator import Validator
from src.circuit_collectives.tools.collectives import (
    Algorithm,
    Primitive,
    Schedule,
    build_schedule,
    split_rounds,
)
from src.circuit_collectives.tools.cost_model import (
    CostParams,
    RoundCost,
    counts_per_direction,
    round_cost,
)
from src.circuit_collectives.tools.topology import LATTICE_KINDS, Topology, round_topology

logger = get_logger("tools.reconfig_planner")

BRUTE_FORCE_MAX_ROUNDS = 10
BRUTE_FORCE_MAX_STANDARD = 3

# Fabric state: edge set plus whether links are counted per direction
StateKey = tuple[frozenset[tuple[int, int]], bool]


@dataclass(frozen=True)
class PlannerInput:
    g0: Topology
    standard_set: tuple[Topology, ...]
    schedule: Schedule
    params: CostParams

    def __post_init__(self) -> None:
        n = self.schedule.n_ranks
        for index, topology in enumerate((self.g0, *self.standard_set)):
            if topology.n != n:
                raise ValidationError(
                    f"topology {index} has {topology.n} ranks, schedule has {n}",
                    field="standard_set" if index else "g0",
                    value=topology.n,
                    context={"validation_type": "rank_count", "n": n},
                )
        for index, topology in enumerate(self.standard_set):
            if not topology.is_connected:
                raise ValidationError(
                    f"standard topology {index} is not connected",
                    field="standard_set",
                    value=index,
                    context={"validation_type": "connected"},
                )

    @property
    def n_rounds(self) -> int:
        return len(self.schedule)

    @property
    def derived_offset(self) -> int:
        return len(self.standard_set) + 1

    @property
    def n_choices(self) -> int:
        return self.derived_offset + self.n_rounds

    def topology_at(self, index: int) -> Topology:
        """Topology denoted by a choice index."""
        if index == 0:
            return self.g0
        if index < self.derived_offset:
            return self.standard_set[index - 1]
        return self.derived[index - self.derived_offset]

    @property
    def derived(self) -> tuple[Topology, ...]:
        return _derived_topologies(self.schedule)


@lru_cache(maxsize=1024)
def _derived_topologies(schedule: Schedule) -> tuple[Topology, ...]:
    return tuple(round_topology(transfers, schedule.n_ranks) for transfers in schedule.rounds)


@dataclass(frozen=True)
class PlanRound:
    """One round of a plan: the chosen topology and what the round costs on it."""

    round: int
    choice: int
    kind: str
    cost: RoundCost
    reconf_s: float
    reconfigured: bool

    @property
    def comm_s(self) -> float:
        return self.cost.time


@dataclass(frozen=True)
class ReconfigPlan:
    """Per-round topology choices with their costs."""

    choices: tuple[int, ...]
    per_round: tuple[PlanRound, ...]
    total_time: float
    n_reconfigs: int
    reconfig_rounds: tuple[int, ...]
    topologies: tuple[Topology, ...] = field(repr=False, compare=False)

    @property
    def comm_time(self) -> float:
        return math.fsum(entry.comm_s for entry in self.per_round)

    @property
    def alpha_time(self) -> float:
        return math.fsum(entry.cost.alpha_term for entry in self.per_round)

    @property
    def beta_time(self) -> float:
        return math.fsum(entry.cost.beta_term for entry in self.per_round)

    @property
    def reconf_time(self) -> float:
        return math.fsum(entry.reconf_s for entry in self.per_round)

    def final_topology(self, default: Topology) -> Topology:
        """Topology the fabric is left in (default when the plan is empty)."""
        return self.topologies[-1] if self.topologies else default


def reconf_indicator(inp: PlannerInput, prev_choice: int, cur_choice: int) -> float:
    """r when the two choices denote different graphs, else 0."""
    same = inp.topology_at(prev_choice).same_graph(inp.topology_at(cur_choice))
    return 0.0 if same else inp.params.reconf_delay


def _assemble(inp: PlannerInput, choices: Sequence[int]) -> ReconfigPlan:
    per_round: list[PlanRound] = []
    topologies: list[Topology] = []
    reconfig_rounds: list[int] = []
    previous = 0
    for index, ((transfers, size), choice) in enumerate(zip(inp.schedule, choices, strict=True)):
        topology = inp.topology_at(choice)
        switched = not inp.topology_at(previous).same_graph(topology)
        if switched:
            reconfig_rounds.append(index)
        per_round.append(
            PlanRound(
                round=index,
                choice=choice,
                kind=topology.kind.value,
                cost=round_cost(topology, transfers, size, inp.params),
                reconf_s=reconf_indicator(inp, previous, choice),
                reconfigured=switched,
            )
        )
        topologies.append(topology)
        previous = choice

    total = math.fsum(
        value for entry in per_round for value in (entry.cost.time, entry.reconf_s)
    )
    return ReconfigPlan(
        choices=tuple(choices),
        per_round=tuple(per_round),
        total_time=total,
        n_reconfigs=len(reconfig_rounds),
        reconfig_rounds=tuple(reconfig_rounds),
        topologies=tuple(topologies),
    )


def _state_key(inp: PlannerInput, index: int) -> StateKey:
    topology = inp.topology_at(index)
    return topology.edges, counts_per_direction(topology, inp.params)


def _check_connected(inp: PlannerInput, plan: ReconfigPlan) -> None:
    if any(not entry.cost.connected for entry in plan.per_round):
        raise ConfigurationError(
            ERROR_CONFIG_PENALTY_TOO_SMALL % inp.params.disconnect_penalty,
            missing_config="disconnect_penalty_s",
            context={"total_s": plan.total_time},
        )


def plan(inp: PlannerInput) -> ReconfigPlan:
    """
    Cost-minimal reconfiguration plan.

    States are fabric configurations (graph plus link-counting mode), so choices that denote
    the same graph are merged. Ties go to fewer reconfigurations, then lower indices.

    Raises:
        ConfigurationError: If the optimum still contains a disconnected round, which means
            the disconnect penalty is too small to act as a barrier
    """
    r = Fraction(inp.params.reconf_delay)
    fixed = range(inp.derived_offset)

    # Lowest index per state; it stands for the state in costs and tie-breaks
    representative: dict[StateKey, int] = {}
    for index in range(inp.n_choices):
        representative.setdefault(_state_key(inp, index), index)

    start = _state_key(inp, 0)
    best: dict[StateKey, tuple[Fraction, int, tuple[int, ...]]] = {
        start: (Fraction(0), 0, ())
    }
    costs: dict[tuple[int, StateKey], Fraction] = {}
    for i, (transfers, size) in enumerate(inp.schedule):
        targets = {_state_key(inp, j) for j in fixed}
        targets.add(_state_key(inp, inp.derived_offset + i))
        layer: dict[StateKey, tuple[Fraction, int, tuple[int, ...]]] = {}
        for state, (value, reconfigs, path) in best.items():
            for target in targets | {state}:
                if (i, target) not in costs:
                    topology = inp.topology_at(representative[target])
                    costs[(i, target)] = Fraction(
                        round_cost(topology, transfers, size, inp.params).time
                    )
                switch = target[0] != state[0]
                candidate = (
                    value + costs[(i, target)] + (r if switch else 0),
                    reconfigs + switch,
                    (*path, representative[target]),
                )
                if target not in layer or candidate < layer[target]:
                    layer[target] = candidate
        best = layer

    _, _, path = min(best.values())
    chosen = _assemble(inp, _choices_from_states(inp, path))
    _check_connected(inp, chosen)
    logger.info(
        "Planned reconfiguration",
        extra={
            "algorithm": inp.schedule.algorithm.value,
            "rounds": inp.n_rounds,
            "n_reconfigs": chosen.n_reconfigs,
            "total_s": chosen.total_time,
        },
    )
    return chosen


def _choices_from_states(inp: PlannerInput, path: Sequence[int]) -> list[int]:
    """Turn a sequence of state representatives into a feasible choice sequence."""
    choices: list[int] = []
    previous = 0
    for i, rep in enumerate(path):
        key = _state_key(inp, rep)
        if key == _state_key(inp, previous):
            choice = previous
        else:
            fixed = [j for j in range(inp.derived_offset) if _state_key(inp, j) == key]
            choice = fixed[0] if fixed else inp.derived_offset + i
        choices.append(choice)
        previous = choice
    return choices


def feasible_choices(inp: PlannerInput, round_index: int, previous: int | None) -> list[int]:
    """Choice indices allowed at a round given the previous round's choice."""
    options = list(range(inp.derived_offset))
    options.append(inp.derived_offset + round_index)
    if previous is not None and previous >= inp.derived_offset and previous not in options:
        options.append(previous)
    return sorted(options)


def _enumerate_sequences(inp: PlannerInput) -> Iterator[tuple[int, ...]]:
    def extend(prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        if len(prefix) == inp.n_rounds:
            yield prefix
            return
        previous = prefix[-1] if prefix else None
        for choice in feasible_choices(inp, len(prefix), previous):
            yield from extend((*prefix, choice))

    yield from extend(())


def brute_force_plan(inp: PlannerInput) -> ReconfigPlan:
    """
    Exhaustive reference solver over every feasible choice sequence.

    Raises:
        InstanceTooLargeError: Above 10 rounds or 3 standard topologies
    """
    if inp.n_rounds > BRUTE_FORCE_MAX_ROUNDS:
        raise InstanceTooLargeError(
            f"brute force handles at most {BRUTE_FORCE_MAX_ROUNDS} rounds",
            limit=BRUTE_FORCE_MAX_ROUNDS,
            actual=inp.n_rounds,
        )
    if len(inp.standard_set) > BRUTE_FORCE_MAX_STANDARD:
        raise InstanceTooLargeError(
            f"brute force handles at most {BRUTE_FORCE_MAX_STANDARD} standard topologies",
            limit=BRUTE_FORCE_MAX_STANDARD,
            actual=len(inp.standard_set),
        )

    round_times: dict[tuple[int, int], Fraction] = {}
    best: tuple[Fraction, int, tuple[int, ...]] | None = None
    for sequence in _enumerate_sequences(inp):
        value = Fraction(0)
        reconfigs = 0
        previous = 0
        for i, ((transfers, size), choice) in enumerate(
            zip(inp.schedule, sequence, strict=True)
        ):
            if (i, choice) not in round_times:
                round_times[(i, choice)] = Fraction(
                    round_cost(inp.topology_at(choice), transfers, size, inp.params).time
                )
            value += round_times[(i, choice)] + Fraction(reconf_indicator(inp, previous, choice))
            reconfigs += not inp.topology_at(previous).same_graph(inp.topology_at(choice))
            previous = choice
        candidate = (value, reconfigs, sequence)
        if best is None or candidate < best:
            best = candidate

    assert best is not None
    return _assemble(inp, best[2])


def validate_plan(inp: PlannerInput, candidate: ReconfigPlan) -> bool:
    """Re-check choice feasibility and the reconfiguration accounting of a plan."""
    if len(candidate.choices) != inp.n_rounds:
        return False
    previous: int | None = None
    for i, choice in enumerate(candidate.choices):
        if choice not in feasible_choices(inp, i, previous):
            return False
        previous = choice

    previous_choice = 0
    reconfigs = 0
    for entry in candidate.per_round:
        expected = reconf_indicator(inp, previous_choice, entry.choice)
        if entry.reconf_s != expected:
            return False
        reconfigs += not inp.topology_at(previous_choice).same_graph(
            inp.topology_at(entry.choice)
        )
        previous_choice = entry.choice
    total = math.fsum(
        value for entry in candidate.per_round for value in (entry.cost.time, entry.reconf_s)
    )
    return reconfigs == candidate.n_reconfigs and total == candidate.total_time


@dataclass(frozen=True)
class CollectivePlan:
    """Best plan over the candidate input algorithms for one collective call."""

    primitive: Primitive
    algorithm: Algorithm
    schedule: Schedule
    plan: ReconfigPlan
    candidate_totals: tuple[tuple[str, float], ...]
    initial: Topology = field(repr=False)

    @property
    def repeats(self) -> int:
        # An all-reduce runs the reduce-scatter plan and then its mirror image
        return 2 if self.primitive is Primitive.ALL_REDUCE else 1

    @property
    def total_time(self) -> float:
        return self.plan.total_time * self.repeats

    @property
    def n_reconfigs(self) -> int:
        return self.plan.n_reconfigs * self.repeats

    @property
    def alpha_time(self) -> float:
        return self.plan.alpha_time * self.repeats

    @property
    def beta_time(self) -> float:
        return self.plan.beta_time * self.repeats

    @property
    def reconf_time(self) -> float:
        return self.plan.reconf_time * self.repeats

    @property
    def final_topology(self) -> Topology:
        """Fabric state after the collective; a mirrored all-gather ends where it began."""
        if self.primitive is Primitive.ALL_REDUCE and self.plan.topologies:
            return self.plan.topologies[0]
        return self.plan.final_topology(self.initial)


def candidate_algorithms(primitive: Primitive, candidates: Sequence[str]) -> list[Algorithm]:
    if primitive is Primitive.ALL_TO_ALL:
        return [Algorithm.DEX]
    return [
        Algorithm(Validator.validate_choice(name, "planner_candidates", list(PLANNER_CANDIDATES)))
        for name in candidates
    ]


@lru_cache(maxsize=4096)
def plan_collective(
    primitive: Primitive,
    total_bytes: float,
    g0: Topology,
    params: CostParams,
    ranks: tuple[int, ...] | None = None,
    standard_set: tuple[Topology, ...] = (),
    candidates: tuple[str, ...] = PLANNER_CANDIDATES,
    tx_per_gpu: int = TX_PER_GPU,
    rx_per_gpu: int = RX_PER_GPU,
) -> CollectivePlan:
    """
    Plan one collective on a reconfigurable fabric starting from g0.

    Every candidate input algorithm is split for the Tx/Rx limits and planned; the cheapest
    plan wins (ties: fewer reconfigurations, then candidate order). An all-reduce plans its
    reduce-scatter and is charged twice.

    Raises:
        UnsupportedError: If no candidate algorithm can run the request
    """
    primitive = Primitive(primitive)
    planned = Primitive.REDUCE_SCATTER if primitive is Primitive.ALL_REDUCE else primitive
    dims = g0.dims if g0.kind in LATTICE_KINDS else None

    best: tuple[tuple[float, int, int], Algorithm, Schedule, ReconfigPlan] | None = None
    totals: list[tuple[str, float]] = []
    failures: list[str] = []
    for order, algorithm in enumerate(candidate_algorithms(primitive, candidates)):
        try:
            schedule = build_schedule(
                algorithm, planned, total_bytes, g0.n, ranks=ranks, dims=dims
            )
        except UnsupportedError as e:
            logger.debug("Skipping candidate", extra={"algorithm": algorithm.value})
            failures.append(e.message)
            continue
        schedule = split_rounds(schedule, tx_per_gpu, rx_per_gpu)
        result = plan(PlannerInput(g0, standard_set, schedule, params))
        totals.append((algorithm.value, result.total_time))
        key = (result.total_time, result.n_reconfigs, order)
        if best is None or key < best[0]:
            best = (key, algorithm, schedule, result)

    if best is None:
        raise UnsupportedError(
            f"no candidate algorithm supports {primitive} here: {'; '.join(failures)}",
            feature=f"plan:{primitive}",
        )
    _, algorithm, schedule, result = best
    return CollectivePlan(
        primitive=primitive,
        algorithm=algorithm,
        schedule=schedule,
        plan=result,
        candidate_totals=tuple(totals),
        initial=g0,
    )
