from mamsim.sim.cost import CostModel
from mamsim.sim.runtime import Proc, Request, RequestKind, Runtime, TraceRecord
from mamsim.sim.window import LockMode, Window

__all__ = ["CostModel", "LockMode", "Proc", "Request", "RequestKind", "Runtime", "TraceRecord", "Window"]
