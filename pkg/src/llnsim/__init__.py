"""Discrete-event comparison of proactive and reactive LLN routing in a smart home."""

__version__ = "0.1.0"

from .engine import Simulator, SimulationError
from .scenario import FloorPlan, Topology, generate_topology
from .simulation import Network, RunConfig, RunResult, run_simulation

__all__ = [
    "__version__",
    "Simulator",
    "SimulationError",
    "FloorPlan",
    "Topology",
    "generate_topology",
    "Network",
    "RunConfig",
    "RunResult",
    "run_simulation",
]
