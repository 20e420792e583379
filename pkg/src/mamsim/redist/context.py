from __future__ import annotations

import dataclasses
import inspect
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from mamsim.app import Application
from mamsim.blockdist import BlockRange, ReadPlan, SendPlan, block_range, block_ranges, compute_read_plan, compute_send_plan
from mamsim.redist.types import DataDescriptor
from mamsim.sim.runtime import Proc
from mamsim.topology import ReconfigPlan, Role


@dataclass(eq=False)
class RankCtx:
    """Everything one rank needs to take part in a redistribution."""

    proc: Proc
    plan: ReconfigPlan
    data: DataDescriptor
    app: Application
    send: np.ndarray  # own source block, exposed in the window (empty on drain-only ranks)
    recv: np.ndarray  # own drain block, filled by the redistribution (empty on source-only ranks)
    key: str = "redist"

    @property
    def rank(self) -> int:
        return self.proc.rank

    @property
    def role(self) -> Role:
        return self.plan.role(self.rank)

    @property
    def comm(self) -> tuple[int, ...]:
        return tuple(range(self.plan.size))

    @property
    def barrier_key(self) -> str:
        return f"{self.key}:drained"

    @cached_property
    def source_ranges(self) -> list[BlockRange]:
        return block_ranges(self.plan.ns, self.data.n)

    @cached_property
    def drain_ranges(self) -> list[BlockRange]:
        return block_ranges(self.plan.nd, self.data.n)

    @cached_property
    def read_plan(self) -> ReadPlan:
        if not self.role.is_drain:
            return compute_read_plan(BlockRange(0, 0), self.source_ranges)
        return compute_read_plan(block_range(self.rank, self.plan.nd, self.data.n), self.source_ranges)

    @cached_property
    def send_plan(self) -> SendPlan:
        if not self.role.is_source:
            return compute_send_plan(BlockRange(0, 0), self.drain_ranges)
        return compute_send_plan(block_range(self.rank, self.plan.ns, self.data.n), self.drain_ranges)

    def on(self, proc: Proc) -> "RankCtx":
        """Same rank, another execution stream."""
        return dataclasses.replace(self, proc=proc)

    def overlap_iteration(self):
        # the application keeps running on the NS sources until the redistribution ends
        return (yield from self.app.run_iteration(self.proc, self.plan.ns, phase="redist"))

    def iterate_until(self, poll: Callable[[], object]):
        """Poll, and run one application iteration each time the poll says not yet."""
        n = 0
        while True:
            res = poll()
            if inspect.isgenerator(res):
                res = yield from res
            if res:
                return n
            yield from self.overlap_iteration()
            n += 1
