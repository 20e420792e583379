"""One reconfiguration NS -> ND from start to finish.

Sources run the pre-reconfiguration iterations, spawn the new ranks (Merge),
redistribute with the requested method and strategy, and the drains resume
the application afterwards. The result is a RunRecord plus the event trace.
"""
from __future__ import annotations

import numpy as np
from loguru import logger

from mamsim import metrics
from mamsim.app import AppConfig, Application
from mamsim.blockdist import block_range
from mamsim.errors import ConfigurationError
from mamsim.redist.collective import col_background, col_blocking
from mamsim.redist.context import RankCtx
from mamsim.redist.rma import rma_blocking, rma_wait_drains
from mamsim.redist.types import DataDescriptor, Method, RedistState, Strategy, check_eligible
from mamsim.sim.cost import CostModel
from mamsim.sim.runtime import Proc, Runtime
from mamsim.topology import ReconfigPlan, Role, merge_roles

SPAWN_KEY = "merge"


class ReconfigRun:
    def __init__(
        self,
        ns: int,
        nd: int,
        method: Method,
        strategy: Strategy,
        *,
        data: DataDescriptor | None = None,
        app: AppConfig | None = None,
        cost: CostModel | None = None,
        seed: int = 0,
        collective_blocks_background: bool = False,
    ):
        check_eligible(method, strategy)
        self.data = data or DataDescriptor(n=2**20)
        self.data.check(strategy)
        self.method = method
        self.strategy = strategy
        self.seed = seed
        self.plan: ReconfigPlan = merge_roles(ns, nd)
        self.rt = Runtime(cost, seed=seed, collective_blocks_background=collective_blocks_background)
        self.app = Application(self.rt, app or AppConfig())

        dtype = self.data.dtype
        n = self.data.n
        self.source = self.rt.rng.integers(0, np.iinfo(dtype).max, size=n, dtype=dtype, endpoint=True)
        empty = np.empty(0, dtype=dtype)
        self.send: dict[int, np.ndarray] = {}
        self.recv: dict[int, np.ndarray] = {}
        for rank in range(self.plan.size):
            role = self.plan.role(rank)
            if role.is_source:
                r = block_range(rank, self.plan.ns, n)
                self.send[rank] = self.source[r.ini:r.end].copy()
            else:
                self.send[rank] = empty
            self.recv[rank] = np.zeros(block_range(rank, self.plan.nd, n).size, dtype=dtype) if role.is_drain else empty

        self.start_at: dict[int, float] = {}
        self.done_at: dict[int, float] = {}
        self.states: dict[int, RedistState] = {}

    @property
    def ns(self) -> int:
        return self.plan.ns

    @property
    def nd(self) -> int:
        return self.plan.nd

    def ctx(self, proc: Proc) -> RankCtx:
        return RankCtx(
            proc=proc, plan=self.plan, data=self.data, app=self.app,
            send=self.send[proc.rank], recv=self.recv[proc.rank],
        )

    # -- rank programs -----------------------------------------------------

    def _program(self, proc: Proc):
        cfg = self.app.config
        ctx = self.ctx(proc)
        role = ctx.role
        if role.is_source:
            yield from self.app.run_phase(proc, self.ns, cfg.reconfig_iteration, "pre")
            if self.plan.spawned:
                yield from proc.spawn(SPAWN_KEY, self.plan.sources)
        else:
            yield from proc.await_spawn(SPAWN_KEY)
            self.app.adopt(proc.rank, cfg.reconfig_iteration)

        self.start_at[proc.rank] = proc.now
        proc.record("redist-begin", f"{self.method.value}/{self.strategy.value} role={role.value}")
        yield from self._dispatch(ctx)
        self.done_at[proc.rank] = proc.now
        proc.record("done")

        if role.is_drain:
            yield from self.app.run_phase(proc, self.nd, cfg.post_iterations, "post")

    def _blocking(self, ctx: RankCtx):
        if self.method is Method.COL:
            yield from col_blocking(ctx)
        else:
            yield from rma_blocking(ctx, self.method)

    def _threaded(self, ctx: RankCtx):
        """The blocking method runs on an auxiliary stream; the main stream keeps iterating."""
        proc = ctx.proc
        if ctx.role is Role.DRAIN_ONLY:
            # nothing to compute on a fresh rank
            yield from self._blocking(ctx)
            return
        aux = self.rt.launch(ctx.rank, lambda p: self._blocking(ctx.on(p)), stream="aux")

        def flag():
            done = not aux.is_alive
            proc.record("flag", "set" if done else "unset")
            return done

        yield from ctx.iterate_until(flag)

    def _dispatch(self, ctx: RankCtx):
        strategy = self.strategy
        if strategy is Strategy.BLOCKING:
            yield from self._blocking(ctx)
        elif strategy is Strategy.THREADING:
            yield from self._threaded(ctx)
        elif self.method is Method.COL:
            yield from col_background(ctx, wait_drains=strategy is Strategy.WAIT_DRAINS)
        else:
            self.states[ctx.rank] = yield from rma_wait_drains(ctx, self.method)

    # -- results -----------------------------------------------------------

    def run(self) -> metrics.RunRecord:
        logger.debug(
            f"run {self.ns}->{self.nd} {self.method.value}/{self.strategy.value} "
            f"n={self.data.n} seed={self.seed}"
        )
        for rank in range(self.plan.size):
            self.rt.launch(rank, self._program)
        self.rt.run()
        record = self.record()
        logger.info(
            f"{self.ns}->{self.nd} {self.method.value}/{self.strategy.value}: "
            f"t_redis={record.t_redis:.6g} n_it={record.n_it_overlapped} omega={record.omega:.4g}"
        )
        if not record.data_ok:
            logger.error(f"{self.ns}->{self.nd} {self.method.value}/{self.strategy.value}: drain data differs from source")
        return record

    def drained(self) -> np.ndarray:
        """Drain buffers concatenated in rank order."""
        return np.concatenate([self.recv[r] for r in self.plan.drains]) if self.data.n else self.source[:0]

    def overlapped(self, rank: int) -> list:
        begin = min(self.start_at.values())
        done = self.done_at[rank]
        return [it for it in self.app.spans(rank) if it.start >= begin and it.end <= done]

    def record(self) -> metrics.RunRecord:
        cfg = self.app.config
        begin = min(self.start_at.values())
        t_redis = max(self.done_at.values()) - begin

        per_rank = [self.overlapped(rank) for rank in range(self.plan.size)]
        n_it = max(len(its) for its in per_rank)
        pre = [it.duration for it in self.app.spans(phase="pre")]
        post = [it.duration for it in self.app.spans(phase="post")]
        t_it_normal = metrics.mean(pre) if pre else cfg.base_iteration_time(self.ns)
        during = [it.duration for its in per_rank for it in its]
        t_it_during = metrics.mean(during) if during else t_it_normal
        t_it_nd = metrics.mean(post) if post else cfg.base_iteration_time(self.nd)

        return metrics.RunRecord(
            method=self.method,
            strategy=self.strategy,
            ns=self.ns,
            nd=self.nd,
            t_redis=t_redis,
            t_it_normal=t_it_normal,
            t_it_during=t_it_during,
            n_it_overlapped=n_it,
            t_it_nd=t_it_nd,
            trace_hash=self.rt.trace_hash(),
            n_elements=self.data.n,
            seed=self.seed,
            data_ok=bool(np.array_equal(self.drained(), self.source)),
        )


def run_reconfiguration(
    ns: int,
    nd: int,
    method: Method,
    strategy: Strategy,
    app: AppConfig | None = None,
    cost: CostModel | None = None,
    seed: int = 0,
    *,
    data: DataDescriptor | None = None,
    collective_blocks_background: bool = False,
    trace_path: str | None = None,
) -> metrics.RunRecord:
    run = ReconfigRun(
        ns, nd, method, strategy, data=data, app=app, cost=cost, seed=seed,
        collective_blocks_background=collective_blocks_background,
    )
    record = run.run()
    if trace_path:
        run.rt.export_trace(trace_path)
    return record


def redistribute_collective(plan: ReconfigPlan, data: DataDescriptor, strategy: Strategy, **kwargs) -> metrics.RunRecord:
    return ReconfigRun(plan.ns, plan.nd, Method.COL, strategy, data=data, **kwargs).run()


def rma_redistribute(
    plan: ReconfigPlan, data: DataDescriptor, method: Method, strategy: Strategy = Strategy.BLOCKING, **kwargs
) -> metrics.RunRecord:
    if not method.is_rma:
        raise ConfigurationError(f"'{method.value}' is not a one-sided method")
    if strategy is not Strategy.BLOCKING:
        raise ConfigurationError(f"rma_redistribute runs the blocking algorithms (got '{strategy.value}')")
    return ReconfigRun(plan.ns, plan.nd, method, strategy, data=data, **kwargs).run()
