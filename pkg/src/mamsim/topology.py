"""Process groups before/after a reconfiguration under the Merge method.

Surviving ranks keep their ids; spawned ranks are appended at the tail and on
a shrink the tail ranks are the ones removed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping

from loguru import logger

from mamsim.errors import InvalidArgumentError


class Role(str, Enum):
    SOURCE_ONLY = "source-only"
    DRAIN_ONLY = "drain-only"
    BOTH = "both"

    @property
    def is_source(self) -> bool:
        return self is not Role.DRAIN_ONLY

    @property
    def is_drain(self) -> bool:
        return self is not Role.SOURCE_ONLY


@dataclass(frozen=True)
class ReconfigPlan:
    ns: int
    nd: int
    roles: Mapping[int, Role] = field(repr=False)

    @property
    def size(self) -> int:
        return max(self.ns, self.nd)

    @property
    def sources(self) -> range:
        return range(self.ns)

    @property
    def drains(self) -> range:
        return range(self.nd)

    @property
    def spawned(self) -> range:
        """Ranks created by the reconfiguration (empty on shrink)."""
        return range(self.ns, self.nd)

    def role(self, rank: int) -> Role:
        try:
            return self.roles[rank]
        except KeyError:
            raise InvalidArgumentError(f"rank {rank} is not part of a {self.ns}->{self.nd} plan") from None

    def count(self, role: Role) -> int:
        return sum(1 for r in self.roles.values() if r is role)

    def ranks_with(self, *roles: Role) -> list[int]:
        return [rank for rank, r in sorted(self.roles.items()) if r in roles]


def merge_roles(ns: int, nd: int) -> ReconfigPlan:
    if ns < 1 or nd < 1:
        msg = f"merge_roles(ns={ns}, nd={nd}) expects both counts >= 1"
        logger.error(msg)
        raise InvalidArgumentError(msg)
    both = min(ns, nd)
    surplus = Role.DRAIN_ONLY if nd > ns else Role.SOURCE_ONLY
    roles = {rank: (Role.BOTH if rank < both else surplus) for rank in range(max(ns, nd))}
    return ReconfigPlan(ns=ns, nd=nd, roles=MappingProxyType(roles))
