from .engine import Fabric, FabricTimeout, RunResult, Stepper, run_inference
from .state import (
    ContentionError,
    EventCategory,
    EventSink,
    Flit,
    FlitKind,
    TileState,
    pe_compute,
    rofm_exec,
)

__all__ = [
    "Fabric",
    "FabricTimeout",
    "RunResult",
    "Stepper",
    "run_inference",
    "ContentionError",
    "EventCategory",
    "EventSink",
    "Flit",
    "FlitKind",
    "TileState",
    "pe_compute",
    "rofm_exec",
]
