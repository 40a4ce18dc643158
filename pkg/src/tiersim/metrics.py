"""Per-container counter snapshots and timeseries export.

Exports are deterministic: same scenario and seed produce byte-identical
files. A run-header record carrying the resolved machine config and seed
leads both formats (a `#` comment line in CSV, the first object in JSONL).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .model import Container, MachineConfig
from .memory import MemoryManager


@dataclass(frozen=True)
class ContainerMetrics:
    local_pages: int
    cxl_pages: int
    demoted: int
    promoted: int
    promotion_attempts: int
    hint_faults: int
    thrash_events: int
    sync_demotions: int
    cxl_fallback_allocs: int
    freed: int
    local_accesses: int
    cxl_accesses: int
    promo_multiplier: float
    throttled: bool
    steady_state: bool


@dataclass(frozen=True)
class MetricsSnapshot:
    tick: int
    containers: dict[str, ContainerMetrics]
    free_local: int
    free_cxl: int
    watermark_state: str
    migrations_this_interval: int


_CONTAINER_FIELDS = [f.name for f in fields(ContainerMetrics)]
_SYSTEM_FIELDS = ["free_local", "free_cxl", "watermark_state", "migrations_this_interval"]
CSV_COLUMNS = ["tick", "row", "container"] + _CONTAINER_FIELDS + _SYSTEM_FIELDS


def container_metrics(c: Container) -> ContainerMetrics:
    k = c.counters
    return ContainerMetrics(
        local_pages=c.local_usage,
        cxl_pages=c.cxl_usage,
        demoted=k.demoted,
        promoted=k.promoted,
        promotion_attempts=k.promotion_attempts,
        hint_faults=k.hint_faults,
        thrash_events=k.thrash_events,
        sync_demotions=k.sync_demotions,
        cxl_fallback_allocs=k.cxl_fallback_allocs,
        freed=k.freed,
        local_accesses=k.local_accesses,
        cxl_accesses=k.cxl_accesses,
        promo_multiplier=c.promo_multiplier,
        throttled=c.throttled,
        steady_state=c.steady_state,
    )


def take_snapshot(mm: MemoryManager, tick: int, migrations_this_interval: int) -> MetricsSnapshot:
    """Consistent point-in-time copy of all counters and gauges."""
    return MetricsSnapshot(
        tick=tick,
        containers={c.cid: container_metrics(c) for c in mm.containers},
        free_local=mm.free_local,
        free_cxl=mm.free_cxl,
        watermark_state=mm.watermark_state().value,
        migrations_this_interval=migrations_this_interval,
    )


def run_header(machine: MachineConfig, container_ids: list[str]) -> dict:
    return {
        "record": "run_header",
        "machine": machine.as_dict(),
        "seed": machine.rng_seed,
        "containers": list(container_ids),
    }


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_timeseries(
    snapshots: list[MetricsSnapshot],
    destination: str | Path,
    fmt: str,
    machine: MachineConfig,
) -> None:
    """Write snapshots to `destination`.

    csv: one row per (tick, container) plus one system row per snapshot,
    after a fixed header row. jsonl: the run header then one object per
    snapshot.
    """
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown export format {fmt!r}")
    dest = Path(destination)
    container_ids = sorted(snapshots[0].containers) if snapshots else []
    header = run_header(machine, container_ids)

    if fmt == "jsonl":
        with dest.open("w", encoding="utf-8") as f:
            f.write(json.dumps(header, sort_keys=True) + "\n")
            for snap in snapshots:
                obj = {
                    "record": "snapshot",
                    "tick": snap.tick,
                    "containers": {cid: asdict(m) for cid, m in snap.containers.items()},
                    "free_local": snap.free_local,
                    "free_cxl": snap.free_cxl,
                    "watermark_state": snap.watermark_state,
                    "migrations_this_interval": snap.migrations_this_interval,
                }
                f.write(json.dumps(obj, sort_keys=True) + "\n")
        return

    with dest.open("w", encoding="utf-8") as f:
        f.write("# " + json.dumps(header, sort_keys=True) + "\n")
        f.write(",".join(CSV_COLUMNS) + "\n")
        for snap in snapshots:
            for cid in sorted(snap.containers):
                m = snap.containers[cid]
                row = [str(snap.tick), "container", cid]
                row += [_fmt(getattr(m, name)) for name in _CONTAINER_FIELDS]
                row += ["", "", "", ""]
                f.write(",".join(row) + "\n")
            row = [str(snap.tick), "system", ""]
            row += [""] * len(_CONTAINER_FIELDS)
            row += [
                str(snap.free_local),
                str(snap.free_cxl),
                snap.watermark_state,
                str(snap.migrations_this_interval),
            ]
            f.write(",".join(row) + "\n")


def read_export(path: str | Path) -> tuple[dict, list[dict]]:
    """Parse either export format back into (header, snapshot dicts).
    Used by the CLI summary command."""
    path = Path(path)
    text = path.read_text(encoding="utf-8").splitlines()
    if not text:
        raise ValueError(f"{path}: empty export")
    if text[0].startswith("# "):
        return _read_csv(text)
    if text[0].startswith("{"):
        return _read_jsonl(text)
    raise ValueError(f"{path}: unrecognised export format")


def _read_jsonl(lines: list[str]) -> tuple[dict, list[dict]]:
    header = json.loads(lines[0])
    snaps = [json.loads(line) for line in lines[1:] if line.strip()]
    return header, snaps


def _parse_cell(name: str, cell: str):
    if name in ("promo_multiplier",):
        return float(cell)
    if name in ("throttled", "steady_state"):
        return cell == "true"
    if name == "watermark_state":
        return cell
    return int(cell)


def _read_csv(lines: list[str]) -> tuple[dict, list[dict]]:
    header = json.loads(lines[0][2:])
    columns = lines[1].split(",")
    snaps: dict[int, dict] = {}
    for line in lines[2:]:
        if not line.strip():
            continue
        cells = line.split(",")
        rec = dict(zip(columns, cells))
        tick = int(rec["tick"])
        snap = snaps.setdefault(
            tick, {"record": "snapshot", "tick": tick, "containers": {}}
        )
        if rec["row"] == "container":
            snap["containers"][rec["container"]] = {
                name: _parse_cell(name, rec[name]) for name in _CONTAINER_FIELDS
            }
        else:
            for name in _SYSTEM_FIELDS:
                snap[name] = _parse_cell(name, rec[name])
    return header, [snaps[t] for t in sorted(snaps)]
