import pytest
from loguru import logger

from mamsim.app import AppConfig
from mamsim.sim.cost import CostModel


def zero_cost(**overrides) -> CostModel:
    """Every latency zero; only what the test sets costs time."""
    fields = dict(
        window_create_latency=0.0,
        window_free_latency=0.0,
        lock_latency=0.0,
        per_message_latency=0.0,
        barrier_latency=0.0,
        spawn_latency=0.0,
        oversubscription_factor=1.0,
    )
    fields.update(overrides)
    return CostModel(**fields)


def kinds(rt, rank: int, stream: str | None = None) -> list[str]:
    return [t.kind for t in rt.trace if t.rank == rank and (stream is None or t.stream == stream)]


def between(rt, rank: int, first: str, last: str) -> list[str]:
    """Event kinds of a rank strictly after its first `first` and before its next `last`."""
    ks = kinds(rt, rank)
    i = ks.index(first)
    j = ks.index(last, i + 1)
    return ks[i + 1:j]


@pytest.fixture
def quiet_app() -> AppConfig:
    # unit iterations, no sync charges, no pre/post phases
    return AppConfig(total_work=2.0, sync_every=1000, total_iterations=0, reconfig_iteration=0)


@pytest.fixture(autouse=True)
def _quiet_logs():
    logger.remove()
    yield
    logger.remove()
