from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from mamsim.errors import ProtocolError


class LockMode(str, Enum):
    NONE = "none"
    SHARED = "shared"
    ALL = "all-locked"


# MPI_MODE_NOCHECK; accepted as a hint, never changes behavior
MODE_NOCHECK = 1


@dataclass
class EpochState:
    """Passive-target lock bookkeeping for every (origin, target) pair of one window."""

    locks: dict[tuple[int, int], LockMode] = field(default_factory=dict)
    lock_all: set[int] = field(default_factory=set)

    def mode(self, origin: int, target: int) -> LockMode:
        if origin in self.lock_all:
            return LockMode.ALL
        return self.locks.get((origin, target), LockMode.NONE)

    def can_access(self, origin: int, target: int) -> bool:
        return self.mode(origin, target) is not LockMode.NONE

    def has_open(self, origin: int) -> bool:
        return origin in self.lock_all or any(o == origin for o, _ in self.locks)

    def open(self, origin: int, target: int):
        if self.mode(origin, target) is not LockMode.NONE:
            raise ProtocolError(f"rank {origin} already holds an epoch on target {target}")
        self.locks[(origin, target)] = LockMode.SHARED

    def close(self, origin: int, target: int):
        if self.locks.get((origin, target)) is not LockMode.SHARED:
            raise ProtocolError(f"rank {origin} unlocks target {target} without holding a lock")
        del self.locks[(origin, target)]

    def open_all(self, origin: int):
        if self.has_open(origin):
            raise ProtocolError(f"rank {origin} calls lock_all while already holding an epoch")
        self.lock_all.add(origin)

    def close_all(self, origin: int):
        if origin not in self.lock_all:
            raise ProtocolError(f"rank {origin} calls unlock_all without lock_all")
        self.lock_all.discard(origin)


@dataclass(eq=False)
class Window:
    id: int
    key: str
    comm: tuple[int, ...]
    buffers: dict[int, np.ndarray] = field(default_factory=dict)
    epochs: EpochState = field(default_factory=EpochState)
    pending: list = field(default_factory=list)  # one-sided Requests not yet complete
    freed: bool = False

    def buffer(self, rank: int) -> np.ndarray:
        try:
            return self.buffers[rank]
        except KeyError:
            raise ProtocolError(f"rank {rank} exposes nothing in window '{self.key}'") from None

    def check_member(self, rank: int):
        if rank not in self.comm:
            raise ProtocolError(f"rank {rank} is not in the communicator of window '{self.key}'")
        if self.freed:
            raise ProtocolError(f"window '{self.key}' has been freed")
