"""
Tests for tools.reconfig_planner using pytest best practices.
"""

from dataclasses import replace

from hypothesis import given, settings
from hypothesis import strategies as st
import pytest
from src.circuit_collectives.config.sim_constants import (
    ALPHA_S,
    BASELINE_ALGORITHMS,
    BASELINE_TOPOLOGIES,
    GIB,
    MIB,
    RECONF_SWEEP_S,
)
from src.circuit_collectives.error_management.exceptions import (
    ConfigurationError,
    InstanceTooLargeError,
    ValidationError,
)
from src.circuit_collectives.tools.collectives import (
    Algorithm,
    Primitive,
    Schedule,
    TransferSet,
    build_schedule,
    rhd_schedule,
    ring_schedule,
)
from src.circuit_collectives.tools.cost_model import CostParams, ideal_cost, schedule_cost
from src.circuit_collectives.tools.reconfig_planner import (
    PlannerInput,
    brute_force_plan,
    feasible_choices,
    plan,
    plan_collective,
    reconf_indicator,
    validate_plan,
)
from src.circuit_collectives.tools.topology import (
    Topology,
    TopologyKind,
    make_default_topology,
    make_topology,
)

from tests.oracles import plan_optimum

SIZES = [4096.0, float(MIB), float(64 * MIB)]
DELAYS = [0.0, ALPHA_S, 10 * ALPHA_S, 1000 * ALPHA_S]


def lattices(n: int) -> list[Topology]:
    kinds = ["ring", "torus2d", "grid2d"] + (["torus3d", "grid3d"] if n >= 8 else [])
    return [make_default_topology(kind, n) for kind in kinds]


@st.composite
def planner_inputs(draw: st.DrawFn, max_rounds: int = 6) -> PlannerInput:
    n = draw(st.sampled_from([4, 8, 16]))
    pool = lattices(n)
    g0 = draw(st.sampled_from(pool))
    standard = draw(st.lists(st.sampled_from(pool), max_size=2, unique=True))
    pairs = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(
        lambda p: p[0] != p[1]
    )
    rounds = draw(
        st.lists(st.lists(pairs, min_size=1, max_size=n), min_size=1, max_size=max_rounds)
    )
    sizes = draw(st.lists(st.sampled_from(SIZES), min_size=len(rounds), max_size=len(rounds)))
    schedule = Schedule(
        n_ranks=n,
        primitive=Primitive.ALL_TO_ALL,
        algorithm=Algorithm.DEX,
        rounds=tuple(TransferSet.of(items) for items in rounds),
        sizes=tuple(sizes),
    )
    params = CostParams(reconf_delay=draw(st.sampled_from(DELAYS)))
    return PlannerInput(g0, tuple(standard), schedule, params)


def rhd_input(g0: Topology, total: float, r: float) -> PlannerInput:
    s = rhd_schedule(g0.n, Primitive.REDUCE_SCATTER, total)
    return PlannerInput(g0, (), s, CostParams(reconf_delay=r))


class TestPlanOptimality:
    """The dynamic program against exhaustive search."""

    @pytest.mark.unit
    @settings(max_examples=200)
    @given(inp=planner_inputs())
    def test_matches_brute_force(self, inp: PlannerInput) -> None:
        """Test the planner finds the brute-force optimum and reconfiguration count."""
        fast = plan(inp)
        exhaustive = brute_force_plan(inp)

        assert fast.total_time == exhaustive.total_time
        assert fast.n_reconfigs == exhaustive.n_reconfigs
        assert validate_plan(inp, fast)

    @pytest.mark.unit
    @settings(max_examples=60)
    @given(inp=planner_inputs(max_rounds=4))
    def test_matches_enumeration_oracle(self, inp: PlannerInput) -> None:
        """Test the optimum against an implementation sharing no planner code."""
        p = inp.params
        expected = plan_optimum(
            inp.schedule.n_ranks,
            inp.g0.edges,
            [t.edges for t in inp.standard_set],
            [list(t) for t, _ in inp.schedule],
            list(inp.schedule.sizes),
            p.alpha,
            p.beta,
            p.reconf_delay,
            p.disconnect_penalty,
        )

        assert plan(inp).total_time == float(expected)

    @pytest.mark.unit
    def test_free_reconfiguration_reaches_ideal(self, torus444: Topology) -> None:
        """Test with r = 0 every round runs contention-free."""
        inp = rhd_input(torus444, 256 * MIB, 0.0)

        result = plan(inp)

        assert result.total_time == ideal_cost(inp.schedule, inp.params)

    @pytest.mark.unit
    def test_prohibitive_delay_never_reconfigures(self, ring8: Topology) -> None:
        """Test a one-second delay keeps the initial topology."""
        inp = rhd_input(ring8, 1024.0, 1.0)

        result = plan(inp)

        assert result.n_reconfigs == 0
        assert result.choices == (0, 0, 0)
        assert result.total_time == schedule_cost(ring8, inp.schedule, inp.params).total_time


class TestReconfigurationCounts:
    """Reconfiguration counts of rhd reduce-scatter over 128 ranks."""

    @pytest.fixture  # type: ignore[misc]
    def torus128(self) -> Topology:
        return make_default_topology("torus3d", 128)

    @pytest.mark.unit
    def test_fast_switching_reconfigures_every_round(self, torus128: Topology) -> None:
        """Test a 5 µs delay on 256 MiB reconfigures all seven rounds."""
        result = plan(rhd_input(torus128, 256 * MIB, 5e-6))

        assert result.n_reconfigs == 7
        assert result.reconfig_rounds == tuple(range(7))

    @pytest.mark.unit
    def test_slow_switching_reconfigures_early_rounds(self, torus128: Topology) -> None:
        """Test a 1 ms delay on 1 GiB reconfigures only the large rounds."""
        result = plan(rhd_input(torus128, GIB, 1e-3))

        assert 3 <= result.n_reconfigs <= 5
        assert result.reconfig_rounds[0] == 0

    @pytest.mark.unit
    @pytest.mark.parametrize("total", [256 * MIB, GIB])
    def test_counts_fall_with_delay(self, torus128: Topology, total: int) -> None:
        """Test a slower switch never leads to more reconfigurations."""
        counts = [plan(rhd_input(torus128, total, r)).n_reconfigs for r in RECONF_SWEEP_S]

        assert counts == sorted(counts, reverse=True)


class TestPlanHelpers:
    """Test cases for feasibility and accounting helpers."""

    @pytest.fixture  # type: ignore[misc]
    def inp(self, ring8: Topology) -> PlannerInput:
        s = rhd_schedule(8, Primitive.REDUCE_SCATTER, 1024.0)
        return PlannerInput(ring8, (make_topology("torus2d", [2, 4]),), s, CostParams())

    @pytest.mark.unit
    def test_feasible_choices(self, inp: PlannerInput) -> None:
        """Test a derived topology may be held but not adopted early."""
        assert feasible_choices(inp, 0, None) == [0, 1, 2]
        assert feasible_choices(inp, 2, 2) == [0, 1, 2, 4]
        assert feasible_choices(inp, 2, 1) == [0, 1, 4]

    @pytest.mark.unit
    def test_reconf_indicator(self, inp: PlannerInput) -> None:
        """Test switching costs r only between different graphs."""
        assert reconf_indicator(inp, 0, 0) == 0.0
        assert reconf_indicator(inp, 0, 1) == inp.params.reconf_delay
        assert reconf_indicator(inp, 2, 3) == inp.params.reconf_delay

    @pytest.mark.unit
    def test_validate_rejects_tampering(self, inp: PlannerInput) -> None:
        """Test wrong counts and infeasible choices are caught."""
        result = plan(inp)

        assert validate_plan(inp, result)
        assert not validate_plan(inp, replace(result, n_reconfigs=result.n_reconfigs + 1))
        assert not validate_plan(inp, replace(result, choices=(4, 4, 4)))
        assert not validate_plan(inp, replace(result, choices=result.choices[:2]))

    @pytest.mark.unit
    def test_plan_breakdown(self, inp: PlannerInput) -> None:
        """Test the plan's parts add up to its total."""
        result = plan(inp)

        assert len(result.per_round) == 3
        assert result.total_time == pytest.approx(result.comm_time + result.reconf_time)
        assert result.comm_time == pytest.approx(result.alpha_time + result.beta_time)
        assert result.reconf_time == pytest.approx(result.n_reconfigs * 5e-6)

    @pytest.mark.unit
    def test_rank_count_mismatch(self, ring8: Topology) -> None:
        """Test every topology must cover the schedule's ranks."""
        s = rhd_schedule(16, Primitive.REDUCE_SCATTER, 1024.0)

        with pytest.raises(ValidationError) as exc_info:
            PlannerInput(ring8, (), s, CostParams())

        assert exc_info.value.field == "g0"

    @pytest.mark.unit
    def test_disconnected_standard_topology(self, ring8: Topology) -> None:
        """Test standard topologies must be connected."""
        s = rhd_schedule(8, Primitive.REDUCE_SCATTER, 1024.0)
        broken = Topology(n=8, edges=frozenset({(0, 1)}))

        with pytest.raises(ValidationError) as exc_info:
            PlannerInput(ring8, (broken,), s, CostParams())

        assert exc_info.value.field == "standard_set"

    @pytest.mark.unit
    def test_penalty_too_small(self) -> None:
        """Test a penalty cheaper than any circuit is reported as a configuration error."""
        g0 = Topology(n=4, edges=frozenset())
        s = rhd_schedule(4, Primitive.REDUCE_SCATTER, 1024.0)
        inp = PlannerInput(g0, (), s, CostParams(disconnect_penalty=1e-12))

        with pytest.raises(ConfigurationError) as exc_info:
            plan(inp)

        assert exc_info.value.missing_config == "disconnect_penalty_s"

    @pytest.mark.unit
    def test_brute_force_round_limit(self) -> None:
        """Test the exhaustive solver refuses more than ten rounds."""
        s = ring_schedule(12, Primitive.REDUCE_SCATTER, 1024.0)
        inp = PlannerInput(make_topology("ring", [12]), (), s, CostParams())

        with pytest.raises(InstanceTooLargeError) as exc_info:
            brute_force_plan(inp)

        assert (exc_info.value.limit, exc_info.value.actual) == (10, 11)

    @pytest.mark.unit
    def test_brute_force_standard_limit(self, ring8: Topology) -> None:
        """Test the exhaustive solver refuses more than three standard topologies."""
        s = rhd_schedule(8, Primitive.REDUCE_SCATTER, 1024.0)
        inp = PlannerInput(ring8, tuple(lattices(8)[:4]), s, CostParams())

        with pytest.raises(InstanceTooLargeError) as exc_info:
            brute_force_plan(inp)

        assert exc_info.value.actual == 4


class TestPlanCollective:
    """Test cases for plan_collective."""

    @pytest.mark.unit
    def test_all_reduce_charged_twice(self, torus444: Topology, params: CostParams) -> None:
        """Test an all-reduce runs its reduce-scatter plan and the mirror."""
        result = plan_collective(Primitive.ALL_REDUCE, float(64 * MIB), torus444, params)

        assert result.schedule.primitive is Primitive.REDUCE_SCATTER
        assert result.total_time == 2 * result.plan.total_time
        assert result.n_reconfigs == 2 * result.plan.n_reconfigs
        assert result.final_topology == result.plan.topologies[0]
        assert {name for name, _ in result.candidate_totals} == {"rhd", "ring", "bucket"}

    @pytest.mark.unit
    def test_all_to_all_uses_dex(self, torus444: Topology, params: CostParams) -> None:
        """Test all-to-all plans the hypercube exchange."""
        result = plan_collective(Primitive.ALL_TO_ALL, float(MIB), torus444, params)

        assert result.algorithm is Algorithm.DEX
        assert result.final_topology == result.plan.topologies[-1]

    @pytest.mark.unit
    def test_best_candidate_wins(self, torus444: Topology, params: CostParams) -> None:
        """Test the chosen plan is the cheapest candidate."""
        result = plan_collective(Primitive.REDUCE_SCATTER, float(GIB), torus444, params)

        assert result.total_time == min(total for _, total in result.candidate_totals)

    @pytest.mark.unit
    def test_subset_of_ranks(self, torus444: Topology, params: CostParams) -> None:
        """Test a collective over part of the fabric plans only those ranks."""
        ranks = tuple(range(0, 64, 4))
        result = plan_collective(Primitive.ALL_GATHER, float(MIB), torus444, params, ranks=ranks)

        for transfers in result.schedule.rounds:
            assert set(transfers.out_degree()) | set(transfers.in_degree()) <= set(ranks)

    @pytest.mark.unit
    @pytest.mark.parametrize("kind", BASELINE_TOPOLOGIES)
    @pytest.mark.parametrize("total", [32 * MIB, 256 * MIB, GIB])
    def test_never_worse_than_fixed_topology(
        self, kind: str, total: int, params: CostParams
    ) -> None:
        """Test reconfiguring never loses to any baseline algorithm on 128 ranks."""
        g0 = make_default_topology(kind, 128)
        result = plan_collective(Primitive.ALL_REDUCE, float(total), g0, params)

        for algorithm in BASELINE_ALGORITHMS:
            baseline = build_schedule(algorithm, "all_reduce", total, 128, dims=g0.dims)
            assert result.total_time <= schedule_cost(g0, baseline, params).total_time

    @pytest.mark.unit
    def test_custom_start(self, params: CostParams) -> None:
        """Test a custom starting fabric gets the default bucket layout."""
        g0 = Topology(n=8, edges=make_topology("ring", [8]).edges)
        result = plan_collective(Primitive.REDUCE_SCATTER, float(MIB), g0, params)

        assert g0.kind is TopologyKind.CUSTOM
        assert result.plan.total_time > 0
