"""Block distribution over ranks and the per-rank communication parameters.

`compute_read_plan` is what a drain computes to know which slice of every
source window it must read; `compute_send_plan` is the source-side mirror used
by the collective (alltoallv) path.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import accumulate
from typing import Sequence

import numpy as np
from loguru import logger

from mamsim.errors import InvalidArgumentError


@dataclass(frozen=True)
class BlockRange:
    ini: int
    end: int

    def __post_init__(self):
        if self.ini < 0 or self.end < self.ini:
            raise InvalidArgumentError(f"invalid block range [{self.ini}, {self.end})")

    @property
    def size(self) -> int:
        return self.end - self.ini

    def intersects(self, other: "BlockRange") -> bool:
        return self.ini < other.end and self.end > other.ini


@dataclass(frozen=True)
class ReadPlan:
    counts: tuple[int, ...]
    displs: tuple[int, ...]
    first_source: int
    last_source: int
    first_index: int

    @property
    def total(self) -> int:
        return self.displs[-1]

    @property
    def epochs(self) -> int:
        """Per-target epochs a Lock+Unlock reader opens."""
        return self.last_source - self.first_source

    def reads(self):
        """(source, remote_offset, local_offset, count) in issue order."""
        remote = self.first_index
        for i in range(self.first_source, self.last_source):
            yield i, remote, self.displs[i], self.counts[i]
            remote = 0


@dataclass(frozen=True)
class SendPlan:
    counts: tuple[int, ...]
    displs: tuple[int, ...]  # source-local read offsets, one per drain

    @property
    def total(self) -> int:
        return sum(self.counts)


def block_range(rank: int, p: int, n: int) -> BlockRange:
    if p < 1 or n < 0:
        raise InvalidArgumentError(f"block_range expects p >= 1 and n >= 0 (got p={p}, n={n})")
    if not 0 <= rank < p:
        raise InvalidArgumentError(f"rank {rank} out of range for {p} ranks")
    base, rem = divmod(n, p)
    ini = rank * base + min(rank, rem)
    return BlockRange(ini, ini + base + (1 if rank < rem else 0))


def block_ranges(p: int, n: int) -> list[BlockRange]:
    return [block_range(r, p, n) for r in range(p)]


def _check_partition(ranges: Sequence[BlockRange], what: str):
    if not ranges:
        raise InvalidArgumentError(f"{what} partition is empty")
    if ranges[0].ini != 0:
        raise InvalidArgumentError(f"{what} partition must start at 0, starts at {ranges[0].ini}")
    for k, (a, b) in enumerate(zip(ranges, ranges[1:])):
        if a.end != b.ini:
            msg = f"{what} partition is not contiguous between blocks {k} and {k + 1}: [{a.ini},{a.end}) [{b.ini},{b.end})"
            logger.error(msg)
            raise InvalidArgumentError(msg)


def _check_inside(my_range: BlockRange, ranges: Sequence[BlockRange]):
    if my_range.end > ranges[-1].end:
        raise InvalidArgumentError(
            f"range [{my_range.ini},{my_range.end}) exceeds the distributed size {ranges[-1].end}"
        )


def _empty_plan(s_size: int) -> ReadPlan:
    return ReadPlan((0,) * s_size, (0,) * (s_size + 1), 0, 0, 0)


def compute_read_plan(my_range: BlockRange, source_ranges: Sequence[BlockRange]) -> ReadPlan:
    _check_partition(source_ranges, "source")
    _check_inside(my_range, source_ranges)
    s_size = len(source_ranges)
    if my_range.size == 0:
        return _empty_plan(s_size)

    counts = [0] * s_size
    first_source, last_source, first_index = -1, s_size, 0
    for i, src in enumerate(source_ranges):
        if my_range.intersects(src):
            if first_source == -1:
                first_source = i
                first_index = my_range.ini - src.ini
            counts[i] = min(my_range.end, src.end) - max(my_range.ini, src.ini)
        elif first_source != -1:
            # exclusive bound; stays s_size when the last source intersects
            last_source = i
            break

    return ReadPlan(
        counts=tuple(counts),
        displs=tuple(accumulate(counts, initial=0)),
        first_source=first_source,
        last_source=last_source,
        first_index=first_index,
    )


def compute_send_plan(my_range: BlockRange, drain_ranges: Sequence[BlockRange]) -> SendPlan:
    _check_partition(drain_ranges, "drain")
    _check_inside(my_range, drain_ranges)
    counts = [0] * len(drain_ranges)
    displs = [0] * len(drain_ranges)
    if my_range.size:
        for j, dst in enumerate(drain_ranges):
            if my_range.intersects(dst):
                lo = max(my_range.ini, dst.ini)
                counts[j] = min(my_range.end, dst.end) - lo
                displs[j] = lo - my_range.ini
    return SendPlan(tuple(counts), tuple(displs))


def oracle_plan(my_range: BlockRange, source_ranges: Sequence[BlockRange]) -> ReadPlan:
    """Reference plan built from the owner of every single element of my_range."""
    _check_partition(source_ranges, "source")
    _check_inside(my_range, source_ranges)
    s_size = len(source_ranges)
    if my_range.size == 0:
        return _empty_plan(s_size)

    ends = np.fromiter((s.end for s in source_ranges), dtype=np.int64, count=s_size)
    owners = np.searchsorted(ends, np.arange(my_range.ini, my_range.end, dtype=np.int64), side="right")
    counts = np.bincount(owners, minlength=s_size)
    first, last = int(owners[0]), int(owners[-1]) + 1
    counts = tuple(int(c) for c in counts)
    return ReadPlan(
        counts=counts,
        displs=tuple(accumulate(counts, initial=0)),
        first_source=first,
        last_source=last,
        first_index=my_range.ini - source_ranges[first].ini,
    )


def read_volume_matrix(ns: int, nd: int, n: int) -> np.ndarray:
    """ND x NS element counts, one row per drain."""
    sources = block_ranges(ns, n)
    return np.array([compute_read_plan(d, sources).counts for d in block_ranges(nd, n)], dtype=np.int64)


def send_volume_matrix(ns: int, nd: int, n: int) -> np.ndarray:
    """NS x ND element counts, one row per source."""
    drains = block_ranges(nd, n)
    return np.array([compute_send_plan(s, drains).counts for s in block_ranges(ns, n)], dtype=np.int64)
