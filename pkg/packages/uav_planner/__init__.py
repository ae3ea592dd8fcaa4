# UAV Planner Package
"""Multi-UAV mmWave network simulation: placement, relocation and user assignment."""

from .harness import SimulationError, compare, run
from .matching import RelocationInfeasibleError
from .scenario import Algorithm, Scenario, load_scenario

__all__ = [
    "Algorithm",
    "RelocationInfeasibleError",
    "Scenario",
    "SimulationError",
    "compare",
    "load_scenario",
    "run",
]
