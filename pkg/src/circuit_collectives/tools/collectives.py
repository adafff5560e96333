"""
Round-by-round transfer schedules for the collective algorithms used as planner inputs and
as baselines, plus the Tx/Rx round splitting.

All generators work on local ranks 0..n-1; build_schedule relabels a participant subset onto
global ranks.
"""

from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from enum import StrEnum
import math
from typing import Any

import numpy as np

from src.circuit_collectives.config.error_constants import ERROR_NOT_POWER_OF_TWO
from src.circuit_collectives.config.logging_config import get_logger
from src.circuit_collectives.error_management.exceptions import (
    UnsupportedError,
    ValidationError,
)
from src.circuit_collectives.error_management.validator import Validator
from src.circuit_collectives.tools.topology import Arc, TopologyKind, default_dims

logger = get_logger("tools.collectives")


class Primitive(StrEnum):
    REDUCE_SCATTER = "reduce_scatter"
    ALL_GATHER = "all_gather"
    ALL_REDUCE = "all_reduce"
    ALL_TO_ALL = "all_to_all"


class Algorithm(StrEnum):
    RING = "ring"
    RHD = "rhd"
    BUCKET = "bucket"
    DEX = "dex"


REDUCTION_PRIMITIVES = (Primitive.REDUCE_SCATTER, Primitive.ALL_GATHER, Primitive.ALL_REDUCE)


@dataclass(frozen=True)
class TransferSet:
    """Directed (src, dst) transfers of one round."""

    transfers: frozenset[Arc]

    def __post_init__(self) -> None:
        for src, dst in self.transfers:
            if src == dst or src < 0 or dst < 0:
                raise ValidationError(
                    f"transfer ({src}, {dst}) must join two distinct ranks",
                    field="transfers",
                    value=(src, dst),
                    context={"validation_type": "transfer"},
                )

    @classmethod
    def of(cls, pairs: Iterable[Arc]) -> "TransferSet":
        return cls(frozenset((int(src), int(dst)) for src, dst in pairs))

    def __iter__(self) -> Iterator[Arc]:
        return iter(sorted(self.transfers))

    def __len__(self) -> int:
        return len(self.transfers)

    @property
    def max_rank(self) -> int:
        return max((max(pair) for pair in self.transfers), default=-1)

    def out_degree(self) -> Counter[int]:
        return Counter(src for src, _ in self.transfers)

    def in_degree(self) -> Counter[int]:
        return Counter(dst for _, dst in self.transfers)

    def relabel(self, ranks: Sequence[int]) -> "TransferSet":
        return TransferSet.of((ranks[src], ranks[dst]) for src, dst in self.transfers)


@dataclass(frozen=True)
class Schedule:
    """Ordered rounds with one transfer size per round (bytes per transfer)."""

    n_ranks: int
    primitive: Primitive
    algorithm: Algorithm
    rounds: tuple[TransferSet, ...]
    sizes: tuple[float, ...]

    def __post_init__(self) -> None:
        Validator.validate_integer(self.n_ranks, "n_ranks", min_value=1)
        if len(self.rounds) != len(self.sizes):
            raise ValidationError(
                f"{len(self.rounds)} rounds but {len(self.sizes)} sizes",
                field="sizes",
                value=len(self.sizes),
                context={"validation_type": "length_mismatch"},
            )
        for index, (transfers, size) in enumerate(zip(self.rounds, self.sizes, strict=True)):
            if not size > 0:
                raise ValidationError(
                    f"round {index} size must be positive",
                    field=f"rounds[{index}].size_bytes",
                    value=size,
                    context={"validation_type": "min_value", "min_value": 0},
                )
            if transfers.max_rank >= self.n_ranks:
                raise ValidationError(
                    f"round {index} references rank {transfers.max_rank} >= {self.n_ranks}",
                    field=f"rounds[{index}].transfers",
                    value=transfers.max_rank,
                    context={"validation_type": "rank_range", "n": self.n_ranks},
                )

    def __len__(self) -> int:
        return len(self.rounds)

    def __iter__(self) -> Iterator[tuple[TransferSet, float]]:
        return iter(zip(self.rounds, self.sizes, strict=True))

    def bytes_sent(self, rank: int) -> float:
        """Total bytes the rank sends over the whole schedule."""
        return math.fsum(size * transfers.out_degree()[rank] for transfers, size in self)

    def mirrored(self) -> "Schedule":
        """The all-gather of a reduce-scatter (and vice versa): rounds in reverse order."""
        swap = {
            Primitive.REDUCE_SCATTER: Primitive.ALL_GATHER,
            Primitive.ALL_GATHER: Primitive.REDUCE_SCATTER,
        }
        if self.primitive not in swap:
            raise UnsupportedError(
                f"{self.primitive} has no mirror image", feature=f"mirror:{self.primitive}"
            )
        return Schedule(
            n_ranks=self.n_ranks,
            primitive=swap[self.primitive],
            algorithm=self.algorithm,
            rounds=self.rounds[::-1],
            sizes=self.sizes[::-1],
        )

    def concat(self, other: "Schedule", primitive: Primitive) -> "Schedule":
        """Run self then other as one schedule labelled primitive."""
        if other.n_ranks != self.n_ranks:
            raise ValidationError(
                "schedules cover different rank counts",
                field="n_ranks",
                value=other.n_ranks,
                context={"validation_type": "length_mismatch", "expected": self.n_ranks},
            )
        return Schedule(
            n_ranks=self.n_ranks,
            primitive=primitive,
            algorithm=self.algorithm,
            rounds=self.rounds + other.rounds,
            sizes=self.sizes + other.sizes,
        )

    def relabel(self, ranks: Sequence[int], n_ranks: int) -> "Schedule":
        """Map local rank i to ranks[i] in an n_ranks-wide schedule."""
        return Schedule(
            n_ranks=n_ranks,
            primitive=self.primitive,
            algorithm=self.algorithm,
            rounds=tuple(transfers.relabel(ranks) for transfers in self.rounds),
            sizes=self.sizes,
        )


def _validate_request(n: int, primitive: str | Primitive, total_bytes: float) -> Primitive:
    Validator.validate_integer(n, "n_ranks", min_value=2)
    Validator.validate_number(total_bytes, "total_bytes", min_value=0.0, exclusive_min=True)
    return Primitive(Validator.validate_choice(primitive, "primitive", list(Primitive)))


def _require_reduction(algorithm: Algorithm, primitive: Primitive) -> None:
    if primitive not in REDUCTION_PRIMITIVES:
        raise UnsupportedError(
            f"{algorithm} does not implement {primitive}",
            feature=f"{algorithm}:{primitive}",
        )


def _require_power_of_two(algorithm: Algorithm, n: int) -> int:
    """log2 n; a rank count that is not a power of two is outside what the algorithm does."""
    try:
        n = Validator.validate_power_of_two(n, "n_ranks")
    except ValidationError as e:
        raise UnsupportedError(
            ERROR_NOT_POWER_OF_TWO % (algorithm, n),
            feature=f"{algorithm}:n={n}",
            context={"n_ranks": n, **e.context},
        ) from e
    return n.bit_length() - 1


def _with_mirror(reduce_scatter: Schedule, primitive: Primitive) -> Schedule:
    if primitive is Primitive.REDUCE_SCATTER:
        return reduce_scatter
    if primitive is Primitive.ALL_GATHER:
        return reduce_scatter.mirrored()
    return reduce_scatter.concat(reduce_scatter.mirrored(), Primitive.ALL_REDUCE)


def ring_schedule(n: int, primitive: str | Primitive, total_bytes: float) -> Schedule:
    """
    Ring collective: n-1 rounds per phase, every rank i sending total/n to (i+1) mod n.

    All-reduce is the reduce-scatter followed by the all-gather, 2(n-1) rounds.
    """
    primitive = _validate_request(n, primitive, total_bytes)
    _require_reduction(Algorithm.RING, primitive)
    step = TransferSet.of((i, (i + 1) % n) for i in range(n))
    reduce_scatter = Schedule(
        n_ranks=n,
        primitive=Primitive.REDUCE_SCATTER,
        algorithm=Algorithm.RING,
        rounds=(step,) * (n - 1),
        sizes=(total_bytes / n,) * (n - 1),
    )
    return _with_mirror(reduce_scatter, primitive)


def _xor_round(n: int, distance: int) -> TransferSet:
    return TransferSet.of((i, i ^ distance) for i in range(n))


def rhd_schedule(n: int, primitive: str | Primitive, total_bytes: float) -> Schedule:
    """
    Recursive halving/doubling.

    Reduce-scatter round k (k = 1..log2 n) exchanges with rank XOR 2^(k-1) and sends
    total/2^k; the all-gather walks the same partners in reverse with growing sizes.

    Raises:
        UnsupportedError: If n is not a power of two
    """
    primitive = _validate_request(n, primitive, total_bytes)
    _require_reduction(Algorithm.RHD, primitive)
    steps = _require_power_of_two(Algorithm.RHD, n)
    reduce_scatter = Schedule(
        n_ranks=n,
        primitive=Primitive.REDUCE_SCATTER,
        algorithm=Algorithm.RHD,
        rounds=tuple(_xor_round(n, 1 << k) for k in range(steps)),
        sizes=tuple(total_bytes / (1 << (k + 1)) for k in range(steps)),
    )
    return _with_mirror(reduce_scatter, primitive)


def bucket_schedule(
    dims: Iterable[int] | str, primitive: str | Primitive, total_bytes: float
) -> Schedule:
    """
    Dimension-ordered multi-ring collective for tori.

    Phase d runs a ring reduce-scatter along every dimension-d ring at once on the shard
    left by the previous phases, so the shard shrinks by dims[d] per phase. The all-gather
    replays the phases backwards.
    """
    sizes_per_dim = Validator.validate_dims(
        dims if isinstance(dims, str) else list(dims), "dims"
    )
    n = math.prod(sizes_per_dim)
    primitive = _validate_request(n, primitive, total_bytes)
    _require_reduction(Algorithm.BUCKET, primitive)

    ids = np.arange(n).reshape(sizes_per_dim)
    rounds: list[TransferSet] = []
    sizes: list[float] = []
    shard = float(total_bytes)
    for axis, size in enumerate(sizes_per_dim):
        forward = np.roll(ids, -1, axis=axis)
        step = TransferSet.of(zip(ids.ravel().tolist(), forward.ravel().tolist(), strict=True))
        shard /= size
        rounds.extend([step] * (size - 1))
        sizes.extend([shard] * (size - 1))

    reduce_scatter = Schedule(
        n_ranks=n,
        primitive=Primitive.REDUCE_SCATTER,
        algorithm=Algorithm.BUCKET,
        rounds=tuple(rounds),
        sizes=tuple(sizes),
    )
    return _with_mirror(reduce_scatter, primitive)


def dex_schedule(n: int, total_bytes: float) -> Schedule:
    """
    Direct-exchange hypercube all-to-all: round k swaps half the buffer with rank XOR 2^k.

    Raises:
        UnsupportedError: If n is not a power of two
    """
    _validate_request(n, Primitive.ALL_TO_ALL, total_bytes)
    steps = _require_power_of_two(Algorithm.DEX, n)
    return Schedule(
        n_ranks=n,
        primitive=Primitive.ALL_TO_ALL,
        algorithm=Algorithm.DEX,
        rounds=tuple(_xor_round(n, 1 << k) for k in range(steps)),
        sizes=(total_bytes / 2,) * steps,
    )


def split_rounds(s: Schedule, tx_per_gpu: int = 1, rx_per_gpu: int = 1) -> Schedule:
    """
    Split rounds so no rank sends more than tx_per_gpu or receives more than rx_per_gpu
    transfers at once.

    Transfers are packed greedily in (src, dst) order into the earliest sub-round with room.
    Feasible rounds pass through unchanged and every sub-round keeps its round's size.
    """
    tx_per_gpu = Validator.validate_integer(tx_per_gpu, "tx_per_gpu", min_value=1)
    rx_per_gpu = Validator.validate_integer(rx_per_gpu, "rx_per_gpu", min_value=1)

    rounds: list[TransferSet] = []
    sizes: list[float] = []
    for transfers, size in s:
        if (
            max(transfers.out_degree().values(), default=0) <= tx_per_gpu
            and max(transfers.in_degree().values(), default=0) <= rx_per_gpu
        ):
            rounds.append(transfers)
            sizes.append(size)
            continue

        packed: list[tuple[list[Arc], Counter[int], Counter[int]]] = []
        for src, dst in transfers:
            for members, sending, receiving in packed:
                if sending[src] < tx_per_gpu and receiving[dst] < rx_per_gpu:
                    break
            else:
                members, sending, receiving = [], Counter(), Counter()
                packed.append((members, sending, receiving))
            members.append((src, dst))
            sending[src] += 1
            receiving[dst] += 1

        logger.debug(
            "Split round", extra={"transfers": len(transfers), "sub_rounds": len(packed)}
        )
        rounds.extend(TransferSet.of(members) for members, _, _ in packed)
        sizes.extend([size] * len(packed))

    return Schedule(
        n_ranks=s.n_ranks,
        primitive=s.primitive,
        algorithm=s.algorithm,
        rounds=tuple(rounds),
        sizes=tuple(sizes),
    )


def bucket_dims(n: int, dims: Sequence[int] | None = None) -> tuple[int, ...]:
    """Dims for a bucket run over n ranks: the given ones if they fit, else a 3D/2D layout."""
    if dims and math.prod(dims) == n:
        return tuple(dims)
    for kind in (TopologyKind.TORUS3D, TopologyKind.TORUS2D):
        try:
            return default_dims(kind, n)
        except ValidationError:
            continue
    return (n,)


def build_schedule(
    algorithm: str | Algorithm,
    primitive: str | Primitive,
    total_bytes: float,
    n_ranks: int,
    ranks: Sequence[int] | None = None,
    dims: Sequence[int] | None = None,
) -> Schedule:
    """
    Generate a schedule for a participant subset and relabel it onto global ranks.

    Args:
        algorithm: ring, rhd, bucket or dex
        primitive: Collective primitive; dex implements only all_to_all
        total_bytes: Buffer size per rank
        n_ranks: Width of the global rank space
        ranks: Participating global ranks in local order (default: all)
        dims: Bucket layout; ignored unless its product matches the participant count

    Raises:
        ValidationError: On invalid parameters
        UnsupportedError: If the algorithm cannot run the request
    """
    algorithm = Algorithm(Validator.validate_choice(algorithm, "algorithm", list(Algorithm)))
    primitive = Primitive(Validator.validate_choice(primitive, "primitive", list(Primitive)))
    n_ranks = Validator.validate_integer(n_ranks, "n_ranks", min_value=2)
    participants = list(range(n_ranks)) if ranks is None else [int(rank) for rank in ranks]
    if len(set(participants)) != len(participants) or any(
        not 0 <= rank < n_ranks for rank in participants
    ):
        raise ValidationError(
            f"ranks must be distinct ranks below {n_ranks}",
            field="ranks",
            value=participants,
            context={"validation_type": "rank_range", "n": n_ranks},
        )
    k = len(participants)

    if (algorithm is Algorithm.DEX) != (primitive is Primitive.ALL_TO_ALL):
        raise UnsupportedError(
            f"{algorithm} does not implement {primitive}", feature=f"{algorithm}:{primitive}"
        )

    match algorithm:
        case Algorithm.RING:
            local = ring_schedule(k, primitive, total_bytes)
        case Algorithm.RHD:
            local = rhd_schedule(k, primitive, total_bytes)
        case Algorithm.BUCKET:
            local = bucket_schedule(bucket_dims(k, dims), primitive, total_bytes)
        case Algorithm.DEX:
            local = dex_schedule(k, total_bytes)

    if ranks is None:
        return local
    return local.relabel(participants, n_ranks)


def _size_value(size: float) -> int | float:
    return int(size) if float(size).is_integer() else size


def schedule_to_dict(s: Schedule) -> dict[str, Any]:
    """JSON form of a schedule."""
    return {
        "n": s.n_ranks,
        "algorithm": s.algorithm.value,
        "primitive": s.primitive.value,
        "rounds": [
            {"size_bytes": _size_value(size), "transfers": [list(pair) for pair in transfers]}
            for transfers, size in s
        ],
    }


def schedule_from_dict(data: Any) -> Schedule:
    """
    Load a schedule from its JSON form.

    Raises:
        ValidationError: If the document is malformed
    """
    data = Validator.validate_dict(
        data, "schedule", required_keys=["n", "algorithm", "primitive", "rounds"]
    )
    rounds: list[TransferSet] = []
    sizes: list[float] = []
    for index, entry in enumerate(Validator.validate_sequence(data["rounds"], "rounds")):
        entry = Validator.validate_dict(
            entry, f"rounds[{index}]", required_keys=["size_bytes", "transfers"]
        )
        label = f"rounds[{index}]"
        sizes.append(
            Validator.validate_number(
                entry["size_bytes"], f"{label}.size_bytes", min_value=0.0, exclusive_min=True
            )
        )
        pairs = []
        for pair in Validator.validate_sequence(entry["transfers"], f"{label}.transfers"):
            src, dst = Validator.validate_sequence(pair, f"{label}.transfers", 2)[:2]
            pairs.append(
                (
                    Validator.validate_integer(src, f"{label}.src", min_value=0),
                    Validator.validate_integer(dst, f"{label}.dst", min_value=0),
                )
            )
        rounds.append(TransferSet.of(pairs))
    return Schedule(
        n_ranks=Validator.validate_integer(data["n"], "n", min_value=1),
        primitive=Primitive(
            Validator.validate_choice(data["primitive"], "primitive", list(Primitive))
        ),
        algorithm=Algorithm(
            Validator.validate_choice(data["algorithm"], "algorithm", list(Algorithm))
        ),
        rounds=tuple(rounds),
        sizes=tuple(sizes),
    )
