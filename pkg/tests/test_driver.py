import pytest

from tiersim.cli import main
from tiersim.driver import Simulation
from tiersim.metrics import read_export
from tiersim.model import ContainerSpec, InvalidConfig, MachineConfig
from tiersim.scenario import (
    Scenario,
    ScenarioContainer,
    ScenarioError,
    parse_scenario,
    parse_size,
)
from tiersim.workloads import WorkloadSpec

from conftest import SCENARIO_DIR


MINIMAL = """\
machine:
  local_capacity: 1000
  cxl_capacity: 500
  low_watermark: 50
  high_watermark: 100
  rng_seed: 42
containers:
  - id: only
    lower_protection: 100
    workload:
      kind: streaming
      footprint: 400
duration: 50
"""


def write(tmp_path, text, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- size parsing -------------------------------------------------------------

def test_parse_size_pages_and_bytes():
    assert parse_size(512, 4096, "x") == 512
    assert parse_size("120MiB", 4096, "x") == 120 * 256
    assert parse_size("1GiB", 4096, "x") == 262144


def test_parse_size_rejects_non_multiples():
    with pytest.raises(ScenarioError):
        parse_size("5000B", 4096, "x")


# -- scenario parsing ------------------------------------------------------------

def test_minimal_scenario_fills_defaults(tmp_path):
    sc = parse_scenario(write(tmp_path, MINIMAL))
    assert sc.machine.rng_seed == 42
    assert sc.machine.tick_length == 100
    assert sc.machine.detector_period == 50
    assert sc.snapshot_interval == 10
    assert sc.containers[0].spec.lower_protection == 100


def test_missing_seed_is_an_error(tmp_path):
    text = MINIMAL.replace("  rng_seed: 42\n", "")
    with pytest.raises(ScenarioError, match="rng_seed"):
        parse_scenario(write(tmp_path, text))


def test_validation_errors_propagate(tmp_path):
    text = MINIMAL.replace("low_watermark: 50", "low_watermark: 500")
    with pytest.raises(InvalidConfig):
        parse_scenario(write(tmp_path, text))


def test_unknown_field_diagnostic(tmp_path):
    text = MINIMAL + "mystery: 1\n"
    with pytest.raises(ScenarioError, match="mystery"):
        parse_scenario(write(tmp_path, text))


def test_three_container_fixture_parses():
    sc = parse_scenario(SCENARIO_DIR / "protection_convergence.yaml")
    assert len(sc.containers) == 3
    assert all(c.spec.lower_protection == 80 * 256 for c in sc.containers)
    footprints = sorted(c.workload.footprint for c in sc.containers)
    assert footprints == [90 * 256, 90 * 256, 120 * 256]


# -- run machineries --------------------------------------------------------------

def small_scenario(**kw):
    machine = MachineConfig(local_capacity=2000, cxl_capacity=2000, rng_seed=99,
                            low_watermark=32, high_watermark=128)
    containers = (
        ScenarioContainer(ContainerSpec("p", 800),
                          WorkloadSpec("streaming", footprint=1500, hotness=0.5)),
        ScenarioContainer(ContainerSpec("q", 800),
                          WorkloadSpec("streaming", footprint=1200, hotness=0.5, launch_delay=20)),
    )
    base = dict(machine=machine, containers=containers, duration=250, snapshot_interval=10)
    base.update(kw)
    return Scenario(**base)


def test_run_summary_shape():
    summary = Simulation(small_scenario()).run()
    assert summary.ticks == 250
    assert set(summary.placements) == {"p", "q"}
    assert summary.total_migrations > 0
    assert summary.oom_events == []


def test_snapshot_cadence_and_final_snapshot():
    sim = Simulation(small_scenario(duration=95, snapshot_interval=30))
    sim.run()
    ticks = [snap.tick for snap in sim.snapshots]
    assert ticks == [0, 30, 60, 90, 94]


def test_phase_order_golden():
    """End-to-end counters frozen for the fixed phase order; any reordering
    of the tick loop shows up here."""
    summary = Simulation(small_scenario()).run()
    assert summary.placements == {"p": (1008, 492), "q": (955, 245)}
    assert summary.total_migrations == 1547
    assert summary.counters["p"]["demoted"] == 679
    assert summary.counters["p"]["promoted"] == 187
    assert summary.counters["q"]["demoted"] == 97
    assert summary.counters["q"]["promoted"] == 584
    assert summary.counters["q"]["cxl_fallback_allocs"] == 732
    assert summary.counters["q"]["hint_faults"] == 4399


def test_oom_terminates_workload():
    machine = MachineConfig(local_capacity=256, cxl_capacity=128, rng_seed=1,
                            low_watermark=16, high_watermark=32)
    containers = (
        ScenarioContainer(ContainerSpec("big", 0),
                          WorkloadSpec("streaming", footprint=1000, hotness=0.5)),
    )
    sc = Scenario(machine=machine, containers=containers, duration=30, snapshot_interval=10)
    sim = Simulation(sc)
    summary = sim.run()
    assert len(summary.oom_events) == 1
    event = summary.oom_events[0]
    assert event[0] == "oom" and event[2] == "big"
    assert sim.workloads["big"].terminated


# -- CLI ------------------------------------------------------------------------

def test_cli_run_writes_export(tmp_path, capsys):
    out = tmp_path / "run.csv"
    rc = main(["run", str(SCENARIO_DIR / "uncontended_local.yaml"),
               "--out", str(out), "--duration", "50"])
    assert rc == 0
    assert out.exists()
    stdout = capsys.readouterr().out
    assert "ran 50 ticks" in stdout
    header, snaps = read_export(out)
    assert snaps[-1]["containers"]["A"]["local_pages"] == 120 * 256


def test_cli_validate_ok(capsys):
    rc = main(["validate", str(SCENARIO_DIR / "thrash_mitigation.yaml")])
    assert rc == 0
    assert "ok" in capsys.readouterr().out


def test_cli_validate_bad_scenario(tmp_path, capsys):
    bad = write(tmp_path, MINIMAL.replace("low_watermark: 50", "low_watermark: 500"))
    rc = main(["validate", str(bad)])
    assert rc == 2
    assert "watermark ordering" in capsys.readouterr().err


def test_cli_summary(tmp_path, capsys):
    out = tmp_path / "run.jsonl"
    assert main(["run", str(SCENARIO_DIR / "uncontended_local.yaml"),
                 "--out", str(out), "--format", "jsonl", "--duration", "50"]) == 0
    capsys.readouterr()
    rc = main(["summary", str(out)])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "final tick 49" in stdout
    assert "A" in stdout


def test_cli_seed_override_changes_header(tmp_path):
    out = tmp_path / "run.jsonl"
    main(["run", str(SCENARIO_DIR / "uncontended_local.yaml"),
          "--out", str(out), "--format", "jsonl", "--seed", "123", "--duration", "20"])
    header, _ = read_export(out)
    assert header["seed"] == 123
