from __future__ import annotations

from pathlib import Path

import pytest

from tiersim.driver import Simulation
from tiersim.model import Container, ContainerSpec, MachineConfig
from tiersim.memory import MemoryManager
from tiersim.scenario import Scenario, ScenarioContainer, parse_scenario

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = REPO_ROOT / "scenarios"

U = 256  # pages per MiB at the 4 KiB default page size


def make_machine(**overrides) -> MachineConfig:
    base = dict(
        local_capacity=240 * U,
        cxl_capacity=64 * U,
        rng_seed=7,
        low_watermark=64,
        high_watermark=512,
    )
    base.update(overrides)
    return MachineConfig(**base)


def make_containers(*specs: tuple) -> list[Container]:
    """specs: (cid, protection[, upper_bound]) tuples."""
    out = []
    for i, spec in enumerate(specs):
        cid, protection = spec[0], spec[1]
        bound = spec[2] if len(spec) > 2 else None
        out.append(Container(cid=cid, index=i, lower_protection=protection, upper_bound=bound))
    return out


def make_mm(machine=None, *specs) -> MemoryManager:
    machine = machine or make_machine()
    containers = make_containers(*(specs or (("A", 0),)))
    return MemoryManager(machine, containers)


def streaming_scenario(machine, containers, duration, **kw) -> Scenario:
    return Scenario(machine=machine, containers=tuple(containers), duration=duration, **kw)


def container(cid, protection, workload, upper_bound=None) -> ScenarioContainer:
    return ScenarioContainer(
        spec=ContainerSpec(cid=cid, lower_protection=protection, upper_bound=upper_bound),
        workload=workload,
    )


def run_fixture(name: str, record_trace: bool = False, **machine_overrides):
    scenario = parse_scenario(SCENARIO_DIR / name)
    if machine_overrides:
        from dataclasses import replace

        scenario = scenario.replace(machine=replace(scenario.machine, **machine_overrides))
    sim = Simulation(scenario, record_trace=record_trace)
    summary = sim.run()
    return sim, summary


@pytest.fixture(scope="session")
def fixture_runs():
    """One cached run of every shipped scenario: {name: (sim, summary)}."""
    runs = {}
    for path in sorted(SCENARIO_DIR.glob("*.yaml")):
        runs[path.name] = run_fixture(path.name)
    return runs
