"""tiersim: deterministic multi-tenant memory tiering simulator."""

from .model import (
    Container,
    ContainerSpec,
    InvalidConfig,
    MachineConfig,
    Tier,
    TierCounters,
    validate_config,
)
from .memory import LruList, MemoryManager, Page, WatermarkState
from .workloads import WorkloadSpec
from .scenario import Scenario, ScenarioError, parse_scenario
from .driver import RunSummary, Simulation, run

__version__ = "0.1.0"

__all__ = [
    "Container",
    "ContainerSpec",
    "InvalidConfig",
    "LruList",
    "MachineConfig",
    "MemoryManager",
    "Page",
    "RunSummary",
    "Scenario",
    "ScenarioError",
    "Simulation",
    "Tier",
    "TierCounters",
    "WatermarkState",
    "WorkloadSpec",
    "parse_scenario",
    "run",
    "validate_config",
]
