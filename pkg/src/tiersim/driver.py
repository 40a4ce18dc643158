"""The master tick loop.

Phase order within a tick is fixed and is part of the observable contract
(guarded by a golden test):

  1. workload requests (allocate / access / free)
  2. LRU aging
  3. promotion pass        every promo_scan_interval ticks
  4. background demotion   every demote_scan_interval ticks, when free local
                           memory sits at or under the low watermark or a
                           container needs its upper bound approached
  5. thrash detector       at detector period boundaries
  6. snapshot              every snapshot_interval ticks

All randomness flows from the single scenario seed, so repeat runs are
byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .demotion import DemotionEngine, MigrationBudget
from .memory import MemoryManager, WatermarkState
from .metrics import MetricsSnapshot, export_timeseries, take_snapshot
from .model import Container, OutOfMemory
from .promotion import PromotionEngine
from .scenario import Scenario
from .thrash import ThrashDetector
from .workloads import AccessRequest, AllocRequest, FreeRequest, build_workload


@dataclass
class PageRegistry:
    """A container's live pages in allocation order; workloads address pages
    by logical position into this sequence."""

    pages: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def extend(self, ids: np.ndarray) -> None:
        if ids.size:
            self.pages = np.concatenate([self.pages, ids])

    def pop_front(self, n: int) -> np.ndarray:
        n = min(n, self.pages.size)
        taken, self.pages = self.pages[:n], self.pages[n:]
        return taken

    def take(self, positions: np.ndarray) -> np.ndarray:
        return self.pages[positions]


@dataclass
class RunSummary:
    ticks: int
    placements: dict[str, tuple[int, int]]
    counters: dict[str, dict]
    total_migrations: int
    oom_events: list[tuple]
    events: list[tuple]
    export_path: str | None


class Simulation:
    def __init__(self, scenario: Scenario, record_trace: bool = False):
        self.scenario = scenario
        self.machine = scenario.machine
        self.rng = np.random.default_rng(self.machine.rng_seed)

        self.containers = [
            Container(
                cid=sc.spec.cid,
                index=i,
                lower_protection=sc.spec.lower_protection,
                upper_bound=sc.spec.upper_bound,
            )
            for i, sc in enumerate(scenario.containers)
        ]
        self.mm = MemoryManager(self.machine, self.containers, record_trace=record_trace)
        self.demotion = DemotionEngine(self.mm, self.machine)
        self.promotion = PromotionEngine(self.mm, self.machine, self.demotion)
        self.detector = ThrashDetector(self.machine, self.containers, self.rng)

        self.mm.on_promote = self.detector.record_promotion_batch
        self.mm.on_demote = self.detector.observe_demotion_batch
        self.mm.sync_demoter = self.demotion.enforce_upper_bound

        self.workloads = {
            sc.spec.cid: build_workload(sc.workload, self.machine.tick_seconds)
            for sc in scenario.containers
        }
        self.registries = {c.cid: PageRegistry() for c in self.containers}
        self.snapshots: list[MetricsSnapshot] = []
        self.oom_events: list[tuple] = []
        self._migrations_at_last_snapshot = 0

    # -- workload plumbing ---------------------------------------------------

    def _apply_ops(self, cid: str, ops: list, tick: int) -> None:
        registry = self.registries[cid]
        workload = self.workloads[cid]
        for op in ops:
            if isinstance(op, AllocRequest):
                try:
                    ids = self.mm.allocate(cid, op.pages, tick)
                    registry.extend(ids)
                except OutOfMemory as exc:
                    registry.extend(exc.placed)
                    self.oom_events.append(("oom", tick, cid, exc.shortfall))
                    workload.terminated = True
                    return
            elif isinstance(op, AccessRequest):
                ids = registry.take(op.positions)
                self.mm.record_access_batch(cid, ids, tick, touches=op.touches)
            elif isinstance(op, FreeRequest):
                ids = registry.pop_front(op.pages)
                self.mm.free_pages(cid, ids)
                workload.live = registry.pages.size
            else:
                raise TypeError(f"unknown workload op {op!r}")

    def _active_counts(self) -> dict[str, int]:
        counts = {}
        for c in self.containers:
            mask = (self.mm.owner == c.index) & self.mm.active
            counts[c.cid] = int(mask.sum())
        return counts

    def _demotion_wanted(self) -> bool:
        if self.mm.watermark_state() == WatermarkState.BELOW_LOW:
            return True
        return any(
            c.upper_bound is not None
            and c.local_usage > c.lower_protection
            and c.local_usage >= c.upper_bound - self.machine.bound_headroom(c.upper_bound)
            for c in self.containers
        )

    def _snapshot(self, tick: int) -> None:
        delta = self.mm.total_migrations - self._migrations_at_last_snapshot
        self._migrations_at_last_snapshot = self.mm.total_migrations
        self.snapshots.append(take_snapshot(self.mm, tick, delta))

    # -- the loop --------------------------------------------------------------

    def run(self) -> RunSummary:
        machine = self.machine
        for tick in range(self.scenario.duration):
            budget = MigrationBudget(machine.migration_cap)

            for c in self.containers:
                ops = self.workloads[c.cid].step(tick, self.rng)
                if ops:
                    self._apply_ops(c.cid, ops, tick)

            self.mm.age_lrus(tick)

            if tick % machine.promo_scan_interval == 0:
                self.promotion.run_promotion(tick, budget)

            if tick % machine.demote_scan_interval == 0 and self._demotion_wanted():
                plan = self.demotion.build_demotion_plan(tick)
                self.demotion.run_background_demotion(plan, tick, budget)

            if tick > 0 and tick % machine.detector_period == 0:
                self.detector.periodic_update(tick, self._active_counts())

            if tick % self.scenario.snapshot_interval == 0:
                self._snapshot(tick)

        last_tick = self.scenario.duration - 1
        if not self.snapshots or self.snapshots[-1].tick != last_tick:
            self._snapshot(last_tick)

        export_path = self.scenario.output_path
        if export_path:
            export_timeseries(self.snapshots, export_path, self.scenario.output_format, machine)

        return RunSummary(
            ticks=self.scenario.duration,
            placements={c.cid: (c.local_usage, c.cxl_usage) for c in self.containers},
            counters={
                c.cid: {
                    "demoted": c.counters.demoted,
                    "promoted": c.counters.promoted,
                    "promotion_attempts": c.counters.promotion_attempts,
                    "hint_faults": c.counters.hint_faults,
                    "thrash_events": c.counters.thrash_events,
                    "sync_demotions": c.counters.sync_demotions,
                    "cxl_fallback_allocs": c.counters.cxl_fallback_allocs,
                    "freed": c.counters.freed,
                    "local_accesses": c.counters.local_accesses,
                    "cxl_accesses": c.counters.cxl_accesses,
                }
                for c in self.containers
            },
            total_migrations=self.mm.total_migrations,
            oom_events=self.oom_events,
            events=list(self.demotion.events),
            export_path=export_path,
        )


def run(scenario: Scenario, record_trace: bool = False) -> RunSummary:
    """Build and execute one simulation instance."""
    return Simulation(scenario, record_trace=record_trace).run()
