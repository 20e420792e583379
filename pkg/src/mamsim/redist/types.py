from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from mamsim.blockdist import ReadPlan
from mamsim.errors import ConfigurationError, InvalidArgumentError, ProtocolError
from mamsim.sim.runtime import Request
from mamsim.sim.window import Window
from mamsim.topology import Role


class Method(str, Enum):
    COL = "col"
    RMA_LOCK = "rma-lock"
    RMA_LOCKALL = "rma-lockall"

    @property
    def is_rma(self) -> bool:
        return self is not Method.COL


class Strategy(str, Enum):
    BLOCKING = "blocking"
    THREADING = "threading"
    NONBLOCKING = "nonblocking"
    WAIT_DRAINS = "wait-drains"

    @property
    def is_background(self) -> bool:
        return self is not Strategy.BLOCKING


ELIGIBLE: dict[Method, frozenset[Strategy]] = {
    Method.COL: frozenset(Strategy),
    Method.RMA_LOCK: frozenset({Strategy.BLOCKING, Strategy.THREADING, Strategy.WAIT_DRAINS}),
    Method.RMA_LOCKALL: frozenset({Strategy.BLOCKING, Strategy.THREADING, Strategy.WAIT_DRAINS}),
}


def is_eligible(method: Method, strategy: Strategy) -> bool:
    return strategy in ELIGIBLE[method]


def check_eligible(method: Method, strategy: Strategy):
    if not is_eligible(method, strategy):
        raise ConfigurationError(f"strategy '{strategy.value}' is not available for method '{method.value}'")


class DataCategory(str, Enum):
    CONSTANT = "constant"
    VARIABLE = "variable"


_DTYPES = {1: np.uint8, 2: np.uint16, 4: np.uint32, 8: np.uint64}


@dataclass(frozen=True)
class DataDescriptor:
    n: int
    category: DataCategory = DataCategory.CONSTANT
    element_width: int = 8

    def __post_init__(self):
        if self.n < 0:
            raise InvalidArgumentError(f"element count must be >= 0 (got {self.n})")
        if self.element_width not in _DTYPES:
            raise InvalidArgumentError(f"element width must be one of {sorted(_DTYPES)} bytes (got {self.element_width})")

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(_DTYPES[self.element_width])

    def allows(self, strategy: Strategy) -> bool:
        return self.category is DataCategory.CONSTANT or not strategy.is_background

    def check(self, strategy: Strategy):
        if not self.allows(strategy):
            raise ConfigurationError(
                f"variable data changes during execution and needs the blocking strategy (got '{strategy.value}')"
            )


class Phase(str, Enum):
    INIT = "init"
    READING = "reading"
    AWAIT_OWN_READS = "await-own-reads"
    BARRIER_SIGNALED = "barrier-signaled"
    AWAIT_BARRIER = "await-barrier"
    UNLOCKING = "unlocking"
    FREEING = "freeing"
    DONE = "done"


# role-specific path through Complete_RMA
PATHS: dict[Role, tuple[Phase, ...]] = {
    Role.DRAIN_ONLY: (Phase.INIT, Phase.READING, Phase.AWAIT_BARRIER, Phase.FREEING, Phase.DONE),
    Role.SOURCE_ONLY: (Phase.INIT, Phase.BARRIER_SIGNALED, Phase.FREEING, Phase.DONE),
    Role.BOTH: (Phase.INIT, Phase.AWAIT_OWN_READS, Phase.BARRIER_SIGNALED, Phase.UNLOCKING, Phase.FREEING, Phase.DONE),
}


@dataclass(eq=False)
class RedistState:
    rank: int
    role: Role
    method: Method
    plan: ReadPlan
    recv: np.ndarray
    phase: Phase = Phase.INIT
    window: Window | None = None
    rgets: list[Request] = field(default_factory=list)
    barrier: Request | None = None
    history: list[Phase] = field(default_factory=lambda: [Phase.INIT])
    computed: int = 0  # iterations run while stepping

    @property
    def done(self) -> bool:
        return self.phase is Phase.DONE

    def advance(self, phase: Phase):
        path = PATHS[self.role]
        at = path.index(self.phase)
        if at + 1 >= len(path) or path[at + 1] is not phase:
            raise ProtocolError(f"rank {self.rank} ({self.role.value}) cannot move from {self.phase.value} to {phase.value}")
        self.phase = phase
        self.history.append(phase)
