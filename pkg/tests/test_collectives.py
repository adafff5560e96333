"""
Tests for tools.collectives using pytest best practices.
"""

import math

import pytest
from src.circuit_collectives.error_management.exceptions import (
    UnsupportedError,
    ValidationError,
)
from src.circuit_collectives.tools.collectives import (
    Algorithm,
    Primitive,
    Schedule,
    TransferSet,
    bucket_dims,
    bucket_schedule,
    build_schedule,
    dex_schedule,
    rhd_schedule,
    ring_schedule,
    schedule_from_dict,
    schedule_to_dict,
    split_rounds,
)

from tests.oracles import (
    ChunkState,
    OracleFault,
    all_gather_done,
    all_to_all_done,
    interpret_schedule,
    reduce_scatter_done,
)

TOTAL = 3 * 2**20
POWERS_OF_TWO = [2, 4, 8, 16, 32, 64]
BUCKET_DIMS = [[2, 2], [3, 3], [2, 3, 4], [3, 3, 3], [4, 4, 4], [4, 8]]


def replay(s: Schedule, total: float = TOTAL) -> ChunkState:
    return interpret_schedule(
        s.n_ranks, s.primitive.value, [list(t) for t, _ in s], list(s.sizes), total
    )


def check_done(s: Schedule, state: ChunkState) -> bool:
    match s.primitive:
        case Primitive.REDUCE_SCATTER:
            return reduce_scatter_done(state)
        case Primitive.ALL_TO_ALL:
            return all_to_all_done(state)
        case _:
            return all_gather_done(state)


class TestSchedulePostconditions:
    """Replay every generated schedule against the chunk model."""

    @pytest.mark.unit
    @pytest.mark.parametrize("n", [2, 3, 5, 8, 12, 16])
    @pytest.mark.parametrize("primitive", list(Primitive)[:3])
    def test_ring(self, n: int, primitive: Primitive) -> None:
        """Test ring schedules complete their collective."""
        s = ring_schedule(n, primitive, TOTAL)

        assert check_done(s, replay(s))

    @pytest.mark.unit
    @pytest.mark.parametrize("n", POWERS_OF_TWO)
    @pytest.mark.parametrize("primitive", list(Primitive)[:3])
    def test_rhd(self, n: int, primitive: Primitive) -> None:
        """Test recursive halving/doubling completes its collective."""
        s = rhd_schedule(n, primitive, TOTAL)

        assert check_done(s, replay(s))

    @pytest.mark.unit
    @pytest.mark.parametrize("dims", BUCKET_DIMS)
    @pytest.mark.parametrize("primitive", list(Primitive)[:3])
    def test_bucket(self, dims: list[int], primitive: Primitive) -> None:
        """Test the multi-ring schedule completes its collective."""
        s = bucket_schedule(dims, primitive, TOTAL)

        assert check_done(s, replay(s))

    @pytest.mark.unit
    @pytest.mark.parametrize("n", POWERS_OF_TWO)
    def test_dex(self, n: int) -> None:
        """Test the hypercube exchange delivers every item."""
        s = dex_schedule(n, TOTAL)

        assert check_done(s, replay(s))

    @pytest.mark.unit
    def test_wrong_sizes_detected(self) -> None:
        """Test the chunk model catches a schedule that sends too little."""
        s = rhd_schedule(8, Primitive.REDUCE_SCATTER, TOTAL)

        with pytest.raises(OracleFault):
            interpret_schedule(8, "reduce_scatter", [list(t) for t, _ in s], [1.0] * 3, TOTAL)


class TestScheduleShapes:
    """Test cases for round counts and sizes."""

    @pytest.mark.unit
    def test_ring_all_reduce_rounds(self) -> None:
        """Test ring all-reduce takes 2(n-1) rounds of total/n."""
        s = ring_schedule(8, Primitive.ALL_REDUCE, 1024)

        assert len(s) == 14
        assert set(s.sizes) == {128}
        assert s.primitive is Primitive.ALL_REDUCE

    @pytest.mark.unit
    def test_rhd_sizes_halve(self) -> None:
        """Test rhd reduce-scatter halves the transfer each round."""
        s = rhd_schedule(16, Primitive.REDUCE_SCATTER, 1024)

        assert s.sizes == (512, 256, 128, 64)
        assert set(s.rounds[2]) == {(i, i ^ 4) for i in range(16)}

    @pytest.mark.unit
    def test_rhd_all_reduce_mirrors(self) -> None:
        """Test the all-reduce second half is the reduce-scatter reversed."""
        s = rhd_schedule(8, Primitive.ALL_REDUCE, 1024)

        assert len(s) == 6
        assert s.rounds[3:] == s.rounds[:3][::-1]
        assert s.sizes == (512, 256, 128, 128, 256, 512)

    @pytest.mark.unit
    def test_rhd_all_gather_partner_order(self) -> None:
        """Test all-gather partners run from the farthest XOR distance down to 1."""
        s = rhd_schedule(8, Primitive.ALL_GATHER, 1024)

        distances = [{src ^ dst for src, dst in step} for step in s.rounds]
        assert distances == [{4}, {2}, {1}]
        assert s.sizes == (128, 256, 512)

    @pytest.mark.unit
    def test_bucket_phases(self) -> None:
        """Test a 2x4 bucket has one round then three smaller ones."""
        s = bucket_schedule([2, 4], Primitive.REDUCE_SCATTER, 1024)

        assert s.sizes == (512, 128, 128, 128)
        assert (0, 4) in set(s.rounds[0])
        assert (3, 0) in set(s.rounds[1])

    @pytest.mark.unit
    def test_dex_sizes(self) -> None:
        """Test dex sends half the buffer in each of log n rounds."""
        s = dex_schedule(32, 1024)

        assert s.sizes == (512,) * 5

    @pytest.mark.unit
    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_bytes_sent_balanced(self, n: int) -> None:
        """Test every rank sends (n-1)/n of the buffer in a ring reduce-scatter."""
        s = ring_schedule(n, Primitive.REDUCE_SCATTER, 1024)

        assert all(math.isclose(s.bytes_sent(r), 1024 * (n - 1) / n) for r in range(n))

    @pytest.mark.unit
    def test_rhd_bytes_match_ring(self) -> None:
        """Test rhd moves the same bytes per rank as the ring."""
        rhd = rhd_schedule(16, Primitive.ALL_REDUCE, 1024)
        ring = ring_schedule(16, Primitive.ALL_REDUCE, 1024)

        assert math.isclose(rhd.bytes_sent(5), ring.bytes_sent(5))


class TestScheduleErrors:
    """Test cases for rejected schedule requests."""

    @pytest.mark.unit
    def test_rhd_needs_power_of_two(self) -> None:
        """Test rhd over six ranks is unsupported."""
        with pytest.raises(UnsupportedError) as exc_info:
            rhd_schedule(6, Primitive.REDUCE_SCATTER, 1024)

        assert exc_info.value.feature == "rhd:n=6"
        assert exc_info.value.context["n_ranks"] == 6
        assert exc_info.value.context["validation_type"] == "power_of_two"

    @pytest.mark.unit
    def test_dex_needs_power_of_two(self) -> None:
        """Test dex over twelve ranks is unsupported."""
        with pytest.raises(UnsupportedError):
            dex_schedule(12, 1024)

    @pytest.mark.unit
    @pytest.mark.parametrize(
        ("algorithm", "primitive"),
        [("dex", "all_reduce"), ("ring", "all_to_all"), ("rhd", "all_to_all")],
    )
    def test_algorithm_primitive_mismatch(self, algorithm: str, primitive: str) -> None:
        """Test dex does only all-to-all and the others never do."""
        with pytest.raises(UnsupportedError) as exc_info:
            build_schedule(algorithm, primitive, 1024, 8)

        assert exc_info.value.feature == f"{algorithm}:{primitive}"

    @pytest.mark.unit
    def test_nonpositive_buffer(self) -> None:
        """Test the buffer size must be positive."""
        with pytest.raises(ValidationError) as exc_info:
            ring_schedule(4, Primitive.ALL_GATHER, 0)

        assert exc_info.value.field == "total_bytes"

    @pytest.mark.unit
    def test_unknown_algorithm(self) -> None:
        """Test an unknown algorithm name is rejected."""
        with pytest.raises(ValidationError) as exc_info:
            build_schedule("tree", "all_reduce", 1024, 8)

        assert exc_info.value.field == "algorithm"

    @pytest.mark.unit
    def test_duplicate_participants(self) -> None:
        """Test participants must be distinct."""
        with pytest.raises(ValidationError) as exc_info:
            build_schedule("ring", "all_gather", 1024, 8, ranks=[0, 1, 1])

        assert exc_info.value.field == "ranks"

    @pytest.mark.unit
    def test_sizes_must_match_rounds(self) -> None:
        """Test a schedule needs one size per round."""
        with pytest.raises(ValidationError) as exc_info:
            Schedule(
                n_ranks=2,
                primitive=Primitive.ALL_GATHER,
                algorithm=Algorithm.RING,
                rounds=(TransferSet.of([(0, 1)]),),
                sizes=(),
            )

        assert exc_info.value.field == "sizes"

    @pytest.mark.unit
    def test_self_transfer(self) -> None:
        """Test a rank cannot send to itself."""
        with pytest.raises(ValidationError):
            TransferSet.of([(3, 3)])

    @pytest.mark.unit
    def test_all_reduce_has_no_mirror(self) -> None:
        """Test only reduce-scatter and all-gather mirror."""
        with pytest.raises(UnsupportedError):
            ring_schedule(4, Primitive.ALL_REDUCE, 1024).mirrored()


class TestSplitRounds:
    """Test cases for Tx/Rx round splitting."""

    @pytest.mark.unit
    def test_feasible_rounds_unchanged(self) -> None:
        """Test rounds within the limits pass through."""
        s = rhd_schedule(8, Primitive.REDUCE_SCATTER, 1024)

        assert split_rounds(s) == s

    @pytest.mark.unit
    def test_fan_out_split(self) -> None:
        """Test a rank sending three transfers with one port needs three sub-rounds."""
        s = Schedule(
            n_ranks=4,
            primitive=Primitive.ALL_TO_ALL,
            algorithm=Algorithm.DEX,
            rounds=(TransferSet.of([(0, 1), (0, 2), (0, 3)]),),
            sizes=(64.0,),
        )

        split = split_rounds(s)

        assert [set(t) for t in split.rounds] == [{(0, 1)}, {(0, 2)}, {(0, 3)}]
        assert split.sizes == (64.0, 64.0, 64.0)

    @pytest.mark.unit
    def test_more_ports_fewer_sub_rounds(self) -> None:
        """Test two Tx ports halve the sub-rounds."""
        s = Schedule(
            n_ranks=5,
            primitive=Primitive.ALL_TO_ALL,
            algorithm=Algorithm.DEX,
            rounds=(TransferSet.of([(0, 1), (0, 2), (0, 3), (0, 4)]),),
            sizes=(64.0,),
        )

        split = split_rounds(s, tx_per_gpu=2)

        assert len(split) == 2
        assert all(max(t.out_degree().values()) <= 2 for t in split.rounds)

    @pytest.mark.unit
    def test_fan_in_split(self) -> None:
        """Test the receive limit also splits."""
        s = Schedule(
            n_ranks=3,
            primitive=Primitive.ALL_GATHER,
            algorithm=Algorithm.RING,
            rounds=(TransferSet.of([(1, 0), (2, 0)]),),
            sizes=(8.0,),
        )

        assert len(split_rounds(s)) == 2

    @pytest.mark.unit
    def test_invalid_port_count(self) -> None:
        """Test port counts must be at least one."""
        s = ring_schedule(4, Primitive.ALL_GATHER, 1024)

        with pytest.raises(ValidationError) as exc_info:
            split_rounds(s, tx_per_gpu=0)

        assert exc_info.value.field == "tx_per_gpu"


class TestBuildSchedule:
    """Test cases for build_schedule and its helpers."""

    @pytest.mark.unit
    def test_subset_relabelled(self) -> None:
        """Test a four-rank ring runs on odd global ranks."""
        s = build_schedule("ring", "reduce_scatter", 1024, 8, ranks=[1, 3, 5, 7])

        assert s.n_ranks == 8
        assert len(s) == 3
        assert set(s.rounds[0]) == {(1, 3), (3, 5), (5, 7), (7, 1)}
        assert s.bytes_sent(0) == 0

    @pytest.mark.unit
    def test_bucket_uses_matching_dims(self) -> None:
        """Test given dims are used when they cover the participants."""
        s = build_schedule("bucket", "all_gather", 1024, 8, dims=[2, 4])

        assert len(s) == 1 + 3

    @pytest.mark.unit
    @pytest.mark.parametrize(
        ("n", "dims", "expected"),
        [(64, None, (4, 4, 4)), (8, [2, 4], (2, 4)), (8, [4, 4], (2, 2, 2)), (7, None, (7,))],
    )
    def test_bucket_dims(self, n: int, dims: list[int] | None, expected: tuple[int, ...]) -> None:
        """Test bucket dims fall back to a balanced layout."""
        assert bucket_dims(n, dims) == expected

    @pytest.mark.unit
    def test_json_form(self) -> None:
        """Test the JSON form of a small schedule."""
        s = rhd_schedule(2, Primitive.REDUCE_SCATTER, 1024)

        assert schedule_to_dict(s) == {
            "n": 2,
            "algorithm": "rhd",
            "primitive": "reduce_scatter",
            "rounds": [{"size_bytes": 512, "transfers": [[0, 1], [1, 0]]}],
        }

    @pytest.mark.unit
    def test_load_restores_schedule(self) -> None:
        """Test a loaded schedule equals the original."""
        s = bucket_schedule([2, 3], Primitive.ALL_REDUCE, 600)

        assert schedule_from_dict(schedule_to_dict(s)) == s

    @pytest.mark.unit
    def test_load_rejects_rank_overflow(self) -> None:
        """Test a transfer beyond n is rejected with the round index."""
        data = {
            "n": 2,
            "algorithm": "ring",
            "primitive": "all_gather",
            "rounds": [{"size_bytes": 8, "transfers": [[0, 2]]}],
        }

        with pytest.raises(ValidationError) as exc_info:
            schedule_from_dict(data)

        assert exc_info.value.field == "rounds[0].transfers"
