"""Synthetic iterative application (CG-like) that runs on top of the runtime.

Data values are opaque; only the time an iteration takes matters. Every
`sync_every`-th iteration adds the application's global collective, modeled as
a barrier_latency charge.
"""
from __future__ import annotations

from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field, model_validator

from mamsim.errors import InvalidArgumentError
from mamsim.sim.cost import CostModel
from mamsim.sim.runtime import Proc, Runtime


class AppConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    total_work: float = Field(0.25, gt=0, description="seconds of compute per iteration on one rank")
    iteration_times: dict[int, float] = Field(default_factory=dict, description="explicit per-p overrides")
    sync_every: int = Field(5, ge=1)
    total_iterations: int = Field(20, ge=0)
    reconfig_iteration: int = Field(10, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.reconfig_iteration > self.total_iterations:
            raise ValueError("reconfig_iteration must not exceed total_iterations")
        for p, t in self.iteration_times.items():
            if p < 1 or t <= 0:
                raise ValueError(f"iteration_times[{p}] must be > 0 for p >= 1")
        return self

    def base_iteration_time(self, p: int) -> float:
        if p < 1:
            raise InvalidArgumentError(f"base_iteration_time expects p >= 1 (got {p})")
        return self.iteration_times.get(p, self.total_work / p)

    @property
    def post_iterations(self) -> int:
        return self.total_iterations - self.reconfig_iteration


@dataclass(frozen=True)
class Iteration:
    rank: int
    index: int
    phase: str
    start: float
    duration: float
    slowdown: float

    @property
    def end(self) -> float:
        return self.start + self.duration


class Application:
    """Per-run iteration bookkeeping shared by every rank."""

    def __init__(self, rt: Runtime, config: AppConfig):
        self.rt = rt
        self.config = config
        self.iterations: list[Iteration] = []
        self._counter: dict[int, int] = {}

    def completed(self, rank: int) -> int:
        return self._counter.get(rank, 0)

    def adopt(self, rank: int, count: int):
        """Spawned ranks resume from the iteration the application reached."""
        self._counter[rank] = max(self._counter.get(rank, 0), count)

    def run_iteration(self, proc: Proc, p: int, *, slowdown: float | None = None, phase: str = "normal"):
        if slowdown is None:
            slowdown = proc.stretch
        if slowdown < 1:
            raise InvalidArgumentError(f"run_iteration slowdown must be >= 1 (got {slowdown})")
        index = self._counter.get(proc.rank, 0)
        duration = self.config.base_iteration_time(p) * slowdown
        start = proc.now
        yield from proc.compute(duration, f"it={index} phase={phase}")
        self.iterations.append(Iteration(proc.rank, index, phase, start, duration, slowdown))
        self._counter[proc.rank] = index + 1
        if (index + 1) % self.config.sync_every == 0:
            yield from self._sync(proc)
        return duration

    def _sync(self, proc: Proc):
        """Local charge for the global collective; only the calling rank advances."""
        rt = self.rt
        aux = rt.aux_process(proc.rank)
        if rt.collective_blocks_background and aux is not None and proc.stream == "main":
            proc.record("sync-blocked", "waiting for background stream")
            yield from proc.block_on(aux, "app-sync")
        proc.record("sync")
        yield from proc.charge(rt.cost.barrier_latency, "app-sync")

    def run_phase(self, proc: Proc, p: int, count: int, phase: str):
        for _ in range(count):
            yield from self.run_iteration(proc, p, slowdown=1.0, phase=phase)

    def spans(self, rank: int | None = None, phase: str | None = None) -> list[Iteration]:
        return [
            it for it in self.iterations
            if (rank is None or it.rank == rank) and (phase is None or it.phase == phase)
        ]


def simulate_baseline(config: AppConfig, cost: CostModel | None = None, p: int = 1, *, seed: int = 0) -> float:
    """Total virtual time of `total_iterations` on p ranks, without reconfiguration."""
    rt = Runtime(cost, seed=seed)
    app = Application(rt, config)

    def program(proc: Proc):
        yield from app.run_phase(proc, p, config.total_iterations, "normal")

    for rank in range(p):
        rt.launch(rank, program)
    rt.run()
    return rt.now
