"""Scenario files: schema, parsing, and validation.

A scenario is a single YAML document. Size-typed fields (capacities,
watermarks, protections, bounds, footprints, block sizes) accept either a
bare integer page count or a byte string like "120MiB"; byte values must be
exact multiples of the page size. rng_seed is mandatory so every run is
reproducible. See the shipped files under scenarios/ for commented examples.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import yaml

from .model import ContainerSpec, MachineConfig, validate_config
from .workloads import WorkloadSpec


class ScenarioError(Exception):
    """Parse failure with a field-path diagnostic."""


_SIZE_RE = re.compile(r"^\s*(\d+)\s*(B|KiB|MiB|GiB|TiB)\s*$")
_SIZE_UNITS = {"B": 1, "KiB": 1024, "MiB": 1024**2, "GiB": 1024**3, "TiB": 1024**4}

_MACHINE_SIZE_FIELDS = {"local_capacity", "cxl_capacity", "low_watermark", "high_watermark"}
_MACHINE_INT_FIELDS = {
    "page_size", "tick_length", "promo_scan_interval", "demote_scan_interval",
    "detector_period", "t_resident", "hash_table_slots", "hint_window",
    "aging_horizon", "migration_cap", "sync_batch_divisor", "sync_retries",
    "rng_seed",
}
_MACHINE_FLOAT_FIELDS = {
    "r_thrashing", "promo_sample_rate", "p_base_fraction", "multiplier_floor",
    "steady_active_delta", "steady_free_rate", "bound_headroom_fraction",
}
_MACHINE_BOOL_FIELDS = {"throttle_enabled", "thrash_mitigation_enabled"}


@dataclass(frozen=True)
class ScenarioContainer:
    spec: ContainerSpec
    workload: WorkloadSpec


@dataclass(frozen=True)
class Scenario:
    machine: MachineConfig
    containers: tuple[ScenarioContainer, ...]
    duration: int
    snapshot_interval: int = 10
    output_path: str | None = None
    output_format: str = "csv"
    source: str = "<inline>"

    def replace(self, **kw) -> "Scenario":
        from dataclasses import replace as _replace

        return _replace(self, **kw)


def parse_size(value, page_size: int, where: str) -> int:
    """Pages from either an int page count or a byte string."""
    if isinstance(value, bool):
        raise ScenarioError(f"{where}: expected a size, got a boolean")
    if isinstance(value, int):
        if value < 0:
            raise ScenarioError(f"{where}: size must be non-negative")
        return value
    if isinstance(value, str):
        m = _SIZE_RE.match(value)
        if not m:
            raise ScenarioError(f"{where}: unparseable size {value!r}")
        nbytes = int(m.group(1)) * _SIZE_UNITS[m.group(2)]
        if nbytes % page_size:
            raise ScenarioError(
                f"{where}: {value!r} is not a multiple of the page size {page_size}"
            )
        return nbytes // page_size
    raise ScenarioError(f"{where}: expected int pages or a byte string, got {type(value).__name__}")


def _parse_machine(raw: dict) -> MachineConfig:
    if not isinstance(raw, dict):
        raise ScenarioError("machine: expected a mapping")
    if "rng_seed" not in raw:
        raise ScenarioError("machine.rng_seed: required, scenarios must be reproducible")
    page_size = raw.get("page_size", 4096)
    if not isinstance(page_size, int) or page_size <= 0:
        raise ScenarioError("machine.page_size: expected a positive integer")
    kwargs = {}
    for key, value in raw.items():
        where = f"machine.{key}"
        if key in _MACHINE_SIZE_FIELDS:
            kwargs[key] = parse_size(value, page_size, where)
        elif key in _MACHINE_INT_FIELDS:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ScenarioError(f"{where}: expected an integer")
            kwargs[key] = value
        elif key in _MACHINE_FLOAT_FIELDS:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ScenarioError(f"{where}: expected a number")
            kwargs[key] = float(value)
        elif key in _MACHINE_BOOL_FIELDS:
            if not isinstance(value, bool):
                raise ScenarioError(f"{where}: expected a boolean")
            kwargs[key] = value
        else:
            raise ScenarioError(f"{where}: unknown machine field")
    for required in ("local_capacity", "cxl_capacity"):
        if required not in kwargs:
            raise ScenarioError(f"machine.{required}: required")
    try:
        return MachineConfig(**kwargs)
    except TypeError as exc:
        raise ScenarioError(f"machine: {exc}") from exc


def _parse_workload(raw: dict, page_size: int, where: str) -> WorkloadSpec:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected a mapping")
    kind = raw.get("kind")
    if kind not in ("streaming", "bursty", "thrashing", "idle"):
        raise ScenarioError(f"{where}.kind: expected one of streaming/bursty/thrashing/idle")
    kwargs: dict = {"kind": kind}
    for key, value in raw.items():
        w = f"{where}.{key}"
        if key == "kind":
            continue
        elif key in ("footprint", "block_size"):
            kwargs[key] = parse_size(value, page_size, w)
        elif key == "launch_delay":
            if not isinstance(value, int) or value < 0:
                raise ScenarioError(f"{w}: expected a non-negative integer tick count")
            kwargs[key] = value
        elif key in ("hotness", "hot_fraction"):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ScenarioError(f"{w}: expected a number")
            kwargs[key] = float(value)
        elif key == "burst_profile":
            if not isinstance(value, list):
                raise ScenarioError(f"{w}: expected a list of [tick, target] pairs")
            profile = []
            for i, entry in enumerate(value):
                if not isinstance(entry, list) or len(entry) != 2:
                    raise ScenarioError(f"{w}[{i}]: expected a [tick, target] pair")
                profile.append((int(entry[0]), parse_size(entry[1], page_size, f"{w}[{i}]")))
            kwargs[key] = tuple(profile)
        else:
            raise ScenarioError(f"{w}: unknown workload field")
    try:
        return WorkloadSpec(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def parse_scenario(path: str | Path) -> Scenario:
    """Load, default-fill, and validate a scenario file."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")

    if "machine" not in raw:
        raise ScenarioError("machine: required section")
    machine = _parse_machine(raw["machine"])
    page_size = machine.page_size

    raw_containers = raw.get("containers")
    if not isinstance(raw_containers, list) or not raw_containers:
        raise ScenarioError("containers: expected a non-empty list")
    containers = []
    for i, rc in enumerate(raw_containers):
        where = f"containers[{i}]"
        if not isinstance(rc, dict):
            raise ScenarioError(f"{where}: expected a mapping")
        cid = rc.get("id")
        if not isinstance(cid, str) or not cid:
            raise ScenarioError(f"{where}.id: required string")
        protection = parse_size(rc.get("lower_protection", 0), page_size, f"{where}.lower_protection")
        bound_raw = rc.get("upper_bound")
        bound = None if bound_raw is None else parse_size(bound_raw, page_size, f"{where}.upper_bound")
        if "workload" not in rc:
            raise ScenarioError(f"{where}.workload: required")
        workload = _parse_workload(rc["workload"], page_size, f"{where}.workload")
        extra = set(rc) - {"id", "lower_protection", "upper_bound", "workload"}
        if extra:
            raise ScenarioError(f"{where}: unknown fields {sorted(extra)}")
        containers.append(
            ScenarioContainer(
                spec=ContainerSpec(cid=cid, lower_protection=protection, upper_bound=bound),
                workload=workload,
            )
        )

    duration = raw.get("duration")
    if not isinstance(duration, int) or duration <= 0:
        raise ScenarioError("duration: expected a positive integer tick count")
    snapshot_interval = raw.get("snapshot_interval", 10)
    if not isinstance(snapshot_interval, int) or snapshot_interval <= 0:
        raise ScenarioError("snapshot_interval: expected a positive integer")

    output_path = None
    output_format = "csv"
    if "output" in raw:
        out = raw["output"]
        if not isinstance(out, dict):
            raise ScenarioError("output: expected a mapping")
        output_path = out.get("path")
        output_format = out.get("format", "csv")
        if output_format not in ("csv", "jsonl"):
            raise ScenarioError("output.format: expected csv or jsonl")

    known = {"machine", "containers", "duration", "snapshot_interval", "output"}
    extra = set(raw) - known
    if extra:
        raise ScenarioError(f"unknown top-level fields {sorted(extra)}")

    scenario = Scenario(
        machine=machine,
        containers=tuple(containers),
        duration=duration,
        snapshot_interval=snapshot_interval,
        output_path=output_path,
        output_format=output_format,
        source=str(path),
    )
    validate_config(machine, [c.spec for c in scenario.containers])
    return scenario
