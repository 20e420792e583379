"""One-sided redistribution: Lock+Unlock and Lockall+Unlockall readers.

Sources expose their block in a window, drains read the intersections they
computed with `compute_read_plan`. The Wait Drains variant splits the method
into `init_rma` and repeated `complete_rma_step` calls, one state machine per
role (drain-only, source-only, both).
"""
from __future__ import annotations

from loguru import logger

from mamsim.errors import ConfigurationError, ProtocolError
from mamsim.redist.context import RankCtx
from mamsim.redist.types import Method, Phase, RedistState
from mamsim.sim.window import MODE_NOCHECK, Window
from mamsim.topology import Role


def _check_method(method: Method):
    if not method.is_rma:
        raise ConfigurationError(f"'{method.value}' is not a one-sided method")


def _read_blocking(ctx: RankCtx, win: Window, method: Method):
    proc, plan = ctx.proc, ctx.read_plan
    if plan.total == 0:
        return
    if method is Method.RMA_LOCK:
        # every lock+get is issued before the first unlock
        for i, remote, local, count in plan.reads():
            yield from proc.win_lock(win, i, assert_=MODE_NOCHECK)
            proc.get(win, i, remote, ctx.recv, local, count)
        for i in range(plan.first_source, plan.last_source):
            yield from proc.win_unlock(win, i)
    else:
        yield from proc.win_lock_all(win, assert_=MODE_NOCHECK)
        for i, remote, local, count in plan.reads():
            proc.get(win, i, remote, ctx.recv, local, count)
        yield from proc.win_unlock_all(win)


def rma_blocking(ctx: RankCtx, method: Method):
    _check_method(method)
    proc = ctx.proc
    win = yield from proc.win_create(ctx.key, ctx.comm, ctx.send)
    if ctx.role.is_drain:
        yield from _read_blocking(ctx, win, method)
    yield from proc.win_free(win)


def _issue_rgets(ctx: RankCtx, state: RedistState):
    proc, plan, win = ctx.proc, ctx.read_plan, state.window
    if plan.total == 0:
        return
    if state.method is Method.RMA_LOCK:
        for i, remote, local, count in plan.reads():
            yield from proc.win_lock(win, i, assert_=MODE_NOCHECK)
            state.rgets.append(proc.rget(win, i, remote, ctx.recv, local, count))
    else:
        yield from proc.win_lock_all(win, assert_=MODE_NOCHECK)
        for i, remote, local, count in plan.reads():
            state.rgets.append(proc.rget(win, i, remote, ctx.recv, local, count))


def _unlock(ctx: RankCtx, state: RedistState):
    proc, plan, win = ctx.proc, ctx.read_plan, state.window
    if plan.total == 0:
        return
    if state.method is Method.RMA_LOCK:
        for i in range(plan.first_source, plan.last_source):
            yield from proc.win_unlock(win, i)
    else:
        yield from proc.win_unlock_all(win)


def init_rma(ctx: RankCtx, method: Method):
    _check_method(method)
    proc = ctx.proc
    state = RedistState(rank=ctx.rank, role=ctx.role, method=method, plan=ctx.read_plan, recv=ctx.recv)
    state.window = yield from proc.win_create(ctx.key, ctx.comm, ctx.send)
    if state.role is Role.DRAIN_ONLY:
        state.advance(Phase.READING)
    elif state.role is Role.SOURCE_ONLY:
        # nothing to read: signal right away
        state.barrier = proc.ibarrier(ctx.barrier_key, ctx.comm)
        state.advance(Phase.BARRIER_SIGNALED)
    else:
        yield from _issue_rgets(ctx, state)
        state.advance(Phase.AWAIT_OWN_READS)
    return state


def complete_rma_step(ctx: RankCtx, state: RedistState):
    proc = ctx.proc
    phase = state.phase
    if phase is Phase.DONE:
        raise ProtocolError(f"rank {state.rank} steps a finished redistribution")

    if phase is Phase.READING:
        yield from _read_blocking(ctx, state.window, state.method)
        state.barrier = proc.ibarrier(ctx.barrier_key, ctx.comm)
        state.advance(Phase.AWAIT_BARRIER)
    elif phase is Phase.AWAIT_BARRIER:
        yield from proc.wait(state.barrier)
        state.advance(Phase.FREEING)
    elif phase is Phase.AWAIT_OWN_READS:
        if (yield from proc.testall(state.rgets)):
            state.barrier = proc.ibarrier(ctx.barrier_key, ctx.comm)
            state.advance(Phase.BARRIER_SIGNALED)
        else:
            yield from ctx.overlap_iteration()
            state.computed += 1
    elif phase is Phase.BARRIER_SIGNALED:
        if (yield from proc.test(state.barrier)):
            state.advance(Phase.UNLOCKING if state.role is Role.BOTH else Phase.FREEING)
        else:
            yield from ctx.overlap_iteration()
            state.computed += 1
    elif phase is Phase.UNLOCKING:
        yield from _unlock(ctx, state)
        for req in state.rgets:
            proc.free_request(req)
        state.advance(Phase.FREEING)
    elif phase is Phase.FREEING:
        yield from proc.win_free(state.window)
        proc.free_request(state.barrier)
        state.advance(Phase.DONE)
    else:
        raise ProtocolError(f"rank {state.rank} has no step for phase {phase.value}")
    return state


def rma_wait_drains(ctx: RankCtx, method: Method):
    state = yield from init_rma(ctx, method)
    while not state.done:
        yield from complete_rma_step(ctx, state)
    logger.debug(f"rank {ctx.rank} ({ctx.role.value}) done after {state.computed} overlapped iterations")
    return state
