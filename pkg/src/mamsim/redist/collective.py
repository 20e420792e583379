"""Collective (alltoallv) redistribution and its background variants."""
from __future__ import annotations

from mamsim.redist.context import RankCtx
from mamsim.topology import Role


def alltoallv_args(ctx: RankCtx):
    """Send/recv vectors sized to the merged communicator."""
    size = ctx.plan.size
    sendcounts, sdispls = [0] * size, [0] * size
    recvcounts, rdispls = [0] * size, [0] * size
    if ctx.role.is_source:
        sp = ctx.send_plan
        sendcounts[:len(sp.counts)] = sp.counts
        sdispls[:len(sp.displs)] = sp.displs
    if ctx.role.is_drain:
        rp = ctx.read_plan
        recvcounts[:len(rp.counts)] = rp.counts
        rdispls[:len(rp.counts)] = rp.displs[:-1]
    return ctx.send, sendcounts, sdispls, ctx.recv, recvcounts, rdispls


def col_blocking(ctx: RankCtx):
    yield from ctx.proc.alltoallv(ctx.key, ctx.comm, *alltoallv_args(ctx))


def col_background(ctx: RankCtx, *, wait_drains: bool = False):
    """Non-blocking alltoallv; with wait_drains an ibarrier must also complete."""
    proc = ctx.proc
    req = proc.ialltoallv(ctx.key, ctx.comm, *alltoallv_args(ctx))
    if ctx.role is Role.DRAIN_ONLY:
        yield from proc.wait(req)
        proc.free_request(req)
        if wait_drains:
            barrier = proc.ibarrier(ctx.barrier_key, ctx.comm)
            yield from proc.wait(barrier)
            proc.free_request(barrier)
        return

    yield from ctx.iterate_until(lambda: proc.test(req))
    proc.free_request(req)
    if wait_drains:
        barrier = proc.ibarrier(ctx.barrier_key, ctx.comm)
        yield from ctx.iterate_until(lambda: proc.test(barrier))
        proc.free_request(barrier)
