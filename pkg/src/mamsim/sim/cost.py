from pydantic import BaseModel, ConfigDict, Field


class CostModel(BaseModel):
    """Virtual-time costs, in seconds unless noted."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    window_create_latency: float = Field(0.25, ge=0)
    window_free_latency: float = Field(1e-3, ge=0)
    lock_latency: float = Field(1e-5, ge=0)
    per_message_latency: float = Field(2e-6, ge=0)
    bandwidth: float = Field(1.5625e9, gt=0, description="elements per second")
    barrier_latency: float = Field(1e-4, ge=0)
    spawn_latency: float = Field(0.5, ge=0)
    oversubscription_factor: float = Field(20.0, ge=1)
    test_cost: float = Field(0.0, ge=0, description="charged per test/testall poll")

    def xfer(self, count: int) -> float:
        return count / self.bandwidth

    def transfer_time(self, count: int) -> float:
        if count == 0:
            return 0.0
        return self.per_message_latency + self.xfer(count)
