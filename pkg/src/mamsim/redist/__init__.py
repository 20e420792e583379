from mamsim.redist.types import DataCategory, DataDescriptor, Method, Phase, RedistState, Strategy, is_eligible
from mamsim.redist.reconfig import ReconfigRun, redistribute_collective, rma_redistribute, run_reconfiguration

__all__ = [
    "DataCategory",
    "DataDescriptor",
    "Method",
    "Phase",
    "RedistState",
    "ReconfigRun",
    "Strategy",
    "is_eligible",
    "redistribute_collective",
    "rma_redistribute",
    "run_reconfiguration",
]
