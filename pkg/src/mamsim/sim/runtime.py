"""Deterministic virtual-time runtime with a passive-target one-sided primitive set.

Every rank runs as one or two simpy processes (the "main" stream and, under
the Threading strategy, an "aux" stream). Primitives are generator methods on
`Proc`; blocking ones are used with `yield from`. The simpy event queue is
ordered by (time, insertion order), so a run is a pure function of its inputs
and seed.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Generator, Iterable, Sequence

import numpy as np
import simpy
from loguru import logger

from mamsim.errors import DeadlockError, InvalidArgumentError, ProtocolError, SimError
from mamsim.sim.cost import CostModel
from mamsim.sim.window import LockMode, Window

Program = Callable[["Proc"], Generator]


class RequestKind(str, Enum):
    GET = "get"
    RGET = "rget"
    IBARRIER = "ibarrier"
    IALLTOALLV = "ialltoallv"
    WIN_CREATE = "win_create"
    WIN_FREE = "win_free"
    SPAWN = "spawn"


@dataclass(eq=False)
class Request:
    id: int
    kind: RequestKind
    rank: int
    event: simpy.Event = field(repr=False)
    completion_time: float | None = None
    completed: bool = False
    freed: bool = False
    target: int | None = None
    on_complete: Callable[[], None] | None = field(default=None, repr=False)


@dataclass(frozen=True)
class TraceRecord:
    vtime: float
    rank: int
    stream: str
    kind: str
    detail: str = ""

    def line(self) -> str:
        return f"{self.vtime!r}\t{self.rank}\t{self.stream}\t{self.kind}\t{self.detail}"


class _Collective:
    def __init__(self, name: str, comm: tuple[int, ...]):
        self.name = name
        self.comm = comm
        self.arrivals: dict[int, float] = {}
        self.requests: dict[int, Request] = {}
        self.payload: dict[int, Any] = {}

    @property
    def complete(self) -> bool:
        return len(self.arrivals) == len(self.comm)


class Runtime:
    def __init__(self, cost: CostModel | None = None, *, seed: int = 0, collective_blocks_background: bool = False):
        self.env = simpy.Environment()
        self.cost = cost or CostModel()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.collective_blocks_background = collective_blocks_background
        self.trace: list[TraceRecord] = []
        self._ids = itertools.count()
        self._win_ids = itertools.count()
        self._windows: dict[str, Window] = {}
        self._collectives: dict[str, _Collective] = {}
        self._closed: set[str] = set()
        self._procs: dict[tuple[int, str], simpy.Process] = {}
        self._blocked: dict[tuple[int, str], str] = {}
        self._link_free: dict[int, float] = {}
        self._aux: dict[int, simpy.Process] = {}
        self._spawn_events: dict[str, simpy.Event] = {}

    @property
    def now(self) -> float:
        return self.env.now

    def record(self, rank: int, stream: str, kind: str, detail: str = ""):
        self.trace.append(TraceRecord(self.env.now, rank, stream, kind, detail))

    # -- processes -------------------------------------------------------

    def launch(self, rank: int, program: Program, stream: str = "main") -> simpy.Process:
        key = (rank, stream)
        if key in self._procs and self._procs[key].is_alive:
            raise ProtocolError(f"rank {rank} already runs a '{stream}' stream")
        proc = Proc(self, rank, stream)
        process = self.env.process(self._body(proc, program))
        self._procs[key] = process
        if stream == "aux":
            self._aux[rank] = process
        return process

    def _body(self, proc: "Proc", program: Program):
        try:
            return (yield from program(proc))
        finally:
            if proc.stream == "aux":
                self._aux.pop(proc.rank, None)
                proc.record("aux-exit")

    def aux_process(self, rank: int) -> simpy.Process | None:
        return self._aux.get(rank)

    def stretch(self, rank: int) -> float:
        """Cost multiplier for a rank whose core is shared with an auxiliary stream."""
        return self.cost.oversubscription_factor if rank in self._aux else 1.0

    def run(self):
        try:
            self.env.run()
        except SimError as e:
            logger.error(f"simulation aborted at t={self.env.now!r}: {e}")
            raise
        blocked = {
            key: self._blocked.get(key, "unknown primitive")
            for key, process in self._procs.items()
            if process.is_alive
        }
        if blocked:
            err = DeadlockError(blocked)
            logger.error(str(err))
            raise err

    # -- requests --------------------------------------------------------

    def _request(self, kind: RequestKind, rank: int) -> Request:
        return Request(id=next(self._ids), kind=kind, rank=rank, event=self.env.event())

    def _complete_after(self, req: Request, delay: float):
        req.completion_time = self.env.now + delay
        self.env.timeout(delay).callbacks.append(lambda _ev, r=req: self._finish(r))

    def _finish(self, req: Request):
        if req.completed:
            return
        req.completed = True
        if req.on_complete is not None:
            req.on_complete()
        if not req.event.triggered:
            req.event.succeed()

    def _poll(self, req: Request) -> bool:
        if not req.completed and req.completion_time is not None and req.completion_time <= self.env.now:
            self._finish(req)
        return req.completed

    def _block(self, proc: "Proc", what: str, event: simpy.Event):
        key = (proc.rank, proc.stream)
        self._blocked[key] = what
        try:
            value = yield event
        finally:
            self._blocked.pop(key, None)
        return value

    def _sleep(self, proc: "Proc", seconds: float, what: str):
        if seconds > 0:
            yield from self._block(proc, what, self.env.timeout(seconds))

    # -- collectives -----------------------------------------------------

    def _join(
        self,
        name: str,
        comm: Sequence[int],
        rank: int,
        kind: RequestKind,
        latency: float,
        *,
        payload: Any = None,
        settle: Callable[[_Collective], tuple[float, float]] | None = None,
    ) -> Request:
        comm = tuple(comm)
        if name in self._closed:
            raise ProtocolError(f"rank {rank} joins collective '{name}' after it completed")
        inst = self._collectives.setdefault(name, _Collective(name, comm))
        if inst.comm != comm:
            raise ProtocolError(f"rank {rank} joins '{name}' with a different communicator")
        if rank not in comm:
            raise ProtocolError(f"rank {rank} is not a member of the communicator of '{name}'")
        if rank in inst.arrivals:
            raise ProtocolError(f"rank {rank} joins collective '{name}' twice")
        req = self._request(kind, rank)
        inst.arrivals[rank] = self.env.now
        inst.requests[rank] = req
        inst.payload[rank] = payload
        if inst.complete:
            del self._collectives[name]
            self._closed.add(name)
            # (wait, work): wait is shared, work is stretched per participant
            wait, work = settle(inst) if settle else (0.0, 0.0)
            for r, rq in inst.requests.items():
                self._complete_after(rq, wait + (latency + work) * self.stretch(r))
        return req

    def spawn_event(self, name: str) -> simpy.Event:
        return self._spawn_events.setdefault(name, self.env.event())

    # -- trace -----------------------------------------------------------

    def trace_lines(self) -> list[str]:
        return [t.line() for t in self.trace]

    def trace_hash(self) -> str:
        h = hashlib.sha256()
        for line in self.trace_lines():
            h.update(line.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    def export_trace(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.trace_lines():
                fh.write(line + "\n")

    def events(self, kind: str | None = None, rank: int | None = None) -> list[TraceRecord]:
        return [
            t for t in self.trace
            if (kind is None or t.kind == kind) and (rank is None or t.rank == rank)
        ]


class Proc:
    """One execution stream of one rank; the handle rank programs talk to."""

    def __init__(self, rt: Runtime, rank: int, stream: str = "main"):
        self.rt = rt
        self.rank = rank
        self.stream = stream

    def __repr__(self):
        return f"Proc(rank={self.rank}, stream={self.stream!r})"

    @property
    def now(self) -> float:
        return self.rt.now

    @property
    def cost(self) -> CostModel:
        return self.rt.cost

    @property
    def stretch(self) -> float:
        return self.rt.stretch(self.rank)

    def record(self, kind: str, detail: str = ""):
        self.rt.record(self.rank, self.stream, kind, detail)

    def charge(self, seconds: float, what: str):
        yield from self.rt._sleep(self, seconds * self.stretch, what)

    def compute(self, duration: float, detail: str = ""):
        self.record("compute", f"{detail} dur={duration!r}".strip())
        yield from self.rt._sleep(self, duration, "compute")

    def block_on(self, event: simpy.Event, what: str):
        return (yield from self.rt._block(self, what, event))

    # -- process management ----------------------------------------------

    def spawn(self, name: str, parents: Sequence[int]):
        """Collective over the parent ranks; spawned ranks start when it completes."""
        self.record("spawn", name)
        req = self.rt._join(f"spawn:{name}", parents, self.rank, RequestKind.SPAWN, self.cost.spawn_latency)
        ev = self.rt.spawn_event(name)
        yield from self._wait_internal(req, f"spawn({name})")
        if not ev.triggered:
            ev.succeed()

    def await_spawn(self, name: str):
        yield from self.block_on(self.rt.spawn_event(name), f"spawned({name})")
        self.record("spawned", name)

    # -- windows ---------------------------------------------------------

    def win_create(self, key: str, comm: Sequence[int], buffer: np.ndarray | None = None):
        rt = self.rt
        win = rt._windows.get(key)
        if win is None or win.freed:
            win = Window(id=next(rt._win_ids), key=key, comm=tuple(comm))
            rt._windows[key] = win
        if win.comm != tuple(comm):
            raise ProtocolError(f"rank {self.rank} creates window '{key}' over a different communicator")
        if self.rank in win.buffers:
            raise ProtocolError(f"rank {self.rank} creates window '{key}' twice")
        win.buffers[self.rank] = buffer if buffer is not None else np.empty(0)
        self.record("win_create", f"{key} size={len(win.buffers[self.rank])}")
        req = rt._join(
            f"win_create:{key}:{win.id}", win.comm, self.rank, RequestKind.WIN_CREATE,
            self.cost.window_create_latency,
        )
        yield from self._wait_internal(req, f"win_create({key})")
        return win

    def win_free(self, win: Window):
        rt = self.rt
        win.check_member(self.rank)
        if win.epochs.has_open(self.rank):
            raise ProtocolError(f"rank {self.rank} frees window '{win.key}' with an open epoch")
        self.record("win_free", win.key)

        def settle(_inst):
            last = max((r.completion_time for r in win.pending if not r.completed), default=rt.now)
            return max(0.0, last - rt.now), 0.0

        req = rt._join(
            f"win_free:{win.key}:{win.id}", win.comm, self.rank, RequestKind.WIN_FREE,
            self.cost.window_free_latency, settle=settle,
        )
        yield from self._wait_internal(req, f"win_free({win.key})")
        win.freed = True

    def win_lock(self, win: Window, target: int, mode: LockMode = LockMode.SHARED, assert_: int = 0):
        if mode is not LockMode.SHARED:
            raise InvalidArgumentError(f"only shared locks are supported (got {mode})")
        win.check_member(self.rank)
        if target not in win.comm:
            raise ProtocolError(f"rank {self.rank} locks target {target} outside window '{win.key}'")
        win.epochs.open(self.rank, target)
        self.record("epoch-open", f"{win.key} target={target}")
        yield from self.charge(self.cost.lock_latency, f"win_lock({target})")

    def win_unlock(self, win: Window, target: int):
        if win.epochs.locks.get((self.rank, target)) is not LockMode.SHARED:
            raise ProtocolError(f"rank {self.rank} unlocks target {target} without holding a lock")
        pending = [r for r in win.pending if r.rank == self.rank and r.target == target]
        yield from self._wait_internal_all(pending, f"win_unlock({target})")
        win.pending = [r for r in win.pending if not r.completed]
        win.epochs.close(self.rank, target)
        self.record("epoch-close", f"{win.key} target={target}")

    def win_lock_all(self, win: Window, assert_: int = 0):
        win.check_member(self.rank)
        win.epochs.open_all(self.rank)
        self.record("epoch-open", f"{win.key} target=all")
        yield from self.charge(self.cost.lock_latency, "win_lock_all")

    def win_unlock_all(self, win: Window):
        if self.rank not in win.epochs.lock_all:
            raise ProtocolError(f"rank {self.rank} calls unlock_all without lock_all")
        pending = [r for r in win.pending if r.rank == self.rank]
        yield from self._wait_internal_all(pending, "win_unlock_all")
        win.pending = [r for r in win.pending if not r.completed]
        win.epochs.close_all(self.rank)
        self.record("epoch-close", f"{win.key} target=all")

    def _access(self, win: Window, target: int, remote_offset: int, local: np.ndarray,
                local_offset: int, count: int, kind: RequestKind) -> Request:
        rt = self.rt
        win.check_member(self.rank)
        if not win.epochs.can_access(self.rank, target):
            raise ProtocolError(f"rank {self.rank} accesses target {target} of '{win.key}' outside an epoch")
        src = win.buffer(target)
        if count < 0 or remote_offset < 0 or remote_offset + count > len(src):
            raise ProtocolError(
                f"rank {self.rank} reads [{remote_offset}, {remote_offset + count}) from target {target} "
                f"whose window holds {len(src)} elements"
            )
        if local_offset < 0 or local_offset + count > len(local):
            raise ProtocolError(
                f"rank {self.rank} writes [{local_offset}, {local_offset + count}) into a local buffer of {len(local)}"
            )
        req = rt._request(kind, self.rank)
        req.target = target
        self.record(kind.value, f"{win.key} target={target} remote={remote_offset} local={local_offset} count={count}")
        if count == 0:
            req.completion_time = rt.now
            rt._finish(req)
            return req

        snapshot = src[remote_offset:remote_offset + count].copy()

        def _land():
            local[local_offset:local_offset + count] = snapshot

        req.on_complete = _land
        s = self.stretch
        occupancy = self.cost.xfer(count) * s
        start = max(rt.now, rt._link_free.get(self.rank, 0.0))
        rt._link_free[self.rank] = start + occupancy
        win.pending.append(req)
        rt._complete_after(req, (start - rt.now) + occupancy + self.cost.per_message_latency * s)
        return req

    def get(self, win: Window, target: int, remote_offset: int, local: np.ndarray, local_offset: int, count: int):
        """Completion is deferred to the closing unlock."""
        self._access(win, target, remote_offset, local, local_offset, count, RequestKind.GET)

    def rget(self, win: Window, target: int, remote_offset: int, local: np.ndarray, local_offset: int, count: int) -> Request:
        return self._access(win, target, remote_offset, local, local_offset, count, RequestKind.RGET)

    # -- requests --------------------------------------------------------

    def _check_request(self, req: Request):
        if req.rank != self.rank:
            raise ProtocolError(f"rank {self.rank} uses request {req.id} owned by rank {req.rank}")
        if req.freed:
            raise ProtocolError(f"rank {self.rank} uses request {req.id} after it was consumed")

    def _wait_internal(self, req: Request, what: str):
        if not self.rt._poll(req):
            yield from self.rt._block(self, what, req.event)
            self.rt._finish(req)

    def _wait_internal_all(self, reqs: Iterable[Request], what: str):
        for req in reqs:
            yield from self._wait_internal(req, what)

    def test(self, req: Request):
        self._check_request(req)
        if self.cost.test_cost:
            yield from self.charge(self.cost.test_cost, "test")
        done = self.rt._poll(req)
        self.record("test", f"{req.kind.value}#{req.id} {'done' if done else 'pending'}")
        return done

    def testall(self, reqs: Sequence[Request]):
        for req in reqs:
            self._check_request(req)
        if self.cost.test_cost:
            yield from self.charge(self.cost.test_cost, "testall")
        done = all([self.rt._poll(r) for r in reqs])
        self.record("testall", f"n={len(reqs)} {'done' if done else 'pending'}")
        return done

    def wait(self, req: Request):
        self._check_request(req)
        self.record("wait", f"{req.kind.value}#{req.id}")
        yield from self._wait_internal(req, f"wait({req.kind.value}#{req.id})")

    def waitall(self, reqs: Sequence[Request]):
        for req in reqs:
            self._check_request(req)
        self.record("waitall", f"n={len(reqs)}")
        yield from self._wait_internal_all(reqs, "waitall")

    def free_request(self, req: Request):
        self._check_request(req)
        if not req.completed:
            raise ProtocolError(f"rank {self.rank} frees pending request {req.id}")
        req.freed = True

    # -- collectives -----------------------------------------------------

    def ibarrier(self, name: str, comm: Sequence[int]) -> Request:
        self.record("ibarrier", name)
        return self.rt._join(name, comm, self.rank, RequestKind.IBARRIER, self.cost.barrier_latency)

    def barrier(self, name: str, comm: Sequence[int]):
        req = self.ibarrier(name, comm)
        yield from self._wait_internal(req, f"barrier({name})")

    def ialltoallv(
        self,
        name: str,
        comm: Sequence[int],
        sendbuf: np.ndarray,
        sendcounts: Sequence[int],
        sdispls: Sequence[int],
        recvbuf: np.ndarray,
        recvcounts: Sequence[int],
        rdispls: Sequence[int],
    ) -> Request:
        """Counts and displacements are indexed by position in `comm`."""
        comm = tuple(comm)
        for vec in (sendcounts, sdispls, recvcounts, rdispls):
            if len(vec) != len(comm):
                raise ProtocolError(f"rank {self.rank} passes alltoallv vectors not sized to the communicator")
        self.record("ialltoallv", f"{name} send={sum(sendcounts)} recv={sum(recvcounts)}")
        payload = (sendbuf, tuple(sendcounts), tuple(sdispls), recvbuf, tuple(recvcounts), tuple(rdispls))
        return self.rt._join(
            name, comm, self.rank, RequestKind.IALLTOALLV, self.cost.barrier_latency,
            payload=payload, settle=lambda inst: _settle_alltoallv(self.rt, inst),
        )

    def alltoallv(self, name: str, comm: Sequence[int], *args):
        req = self.ialltoallv(name, comm, *args)
        yield from self._wait_internal(req, f"alltoallv({name})")


def _settle_alltoallv(rt: Runtime, inst: _Collective) -> tuple[float, float]:
    comm = inst.comm
    for si, s in enumerate(comm):
        sendcounts = inst.payload[s][1]
        for di, d in enumerate(comm):
            recvcounts = inst.payload[d][4]
            if sendcounts[di] != recvcounts[si]:
                raise ProtocolError(
                    f"alltoallv '{inst.name}': rank {s} sends {sendcounts[di]} to rank {d}, "
                    f"which expects {recvcounts[si]}"
                )

    for di, d in enumerate(comm):
        recvbuf, recvcounts, rdispls = inst.payload[d][3:]

        def _land(d_idx=di, recvbuf=recvbuf, recvcounts=recvcounts, rdispls=rdispls):
            for si, s in enumerate(comm):
                c = recvcounts[si]
                if c:
                    sendbuf, _, sdispls = inst.payload[s][:3]
                    off = sdispls[d_idx]
                    recvbuf[rdispls[si]:rdispls[si] + c] = sendbuf[off:off + c]

        inst.requests[d].on_complete = _land

    heaviest = max(sum(inst.payload[d][4]) for d in comm)
    return 0.0, rt.cost.transfer_time(heaviest)
