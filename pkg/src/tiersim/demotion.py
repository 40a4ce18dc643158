"""Background demotion with per-container prioritisation and bound enforcement.

Scan budgets scale with how far a container sits above its lower protection:
containers at or under protection are exempt, heavier overage draws a larger
share of demotion. Containers close to their upper bound get an extra quota
regardless of watermark state so the bound is approached gently; crossing it
at allocation time triggers synchronous demotion of the container's own LRU
tail.

Victim selection mirrors reclaim: only inactive pages inside the scan window
are demoted, active pages in the window are deactivated for the next pass.
Containers without a configured protection (protection zero) additionally get
second-chance semantics: an inactive page touched since its deactivation is
reactivated instead of demoted. Configured protections demote in pure LRU
order, which is what pushes usage back to the fair share.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Container, MachineConfig
from .memory import MemoryManager, Tier, WatermarkState


def eq_demotion_scan(n_lru: int, n_cgroup: int, n_protection: int) -> int:
    """Pages of a length-n_lru LRU list to consider for demotion, scaled by
    the container's overage above protection. Zero at or under protection."""
    if n_cgroup <= n_protection or n_cgroup <= 0:
        return 0
    return (n_lru * (n_cgroup - n_protection)) // n_cgroup


@dataclass
class PlanEntry:
    cid: str
    d_scan: int
    exempt: bool
    approach_extra: int = 0


@dataclass
class DemotionPlan:
    tick: int
    watermark_pressure: bool
    entries: list[PlanEntry]

    def targets(self) -> list[PlanEntry]:
        return [e for e in self.entries if not e.exempt and (e.d_scan > 0 or e.approach_extra > 0)]


class MigrationBudget:
    """Per-tick global cap on background migrations (promotions plus
    background demotions). Synchronous bound demotions are exempt so the
    hard cap can always be enforced. cap <= 0 means unlimited."""

    def __init__(self, cap: int):
        self.cap = cap
        self.used = 0

    def take(self, wanted: int) -> int:
        if self.cap <= 0:
            return wanted
        granted = min(wanted, self.cap - self.used)
        return max(0, granted)

    def spend(self, n: int) -> None:
        self.used += n


class DemotionEngine:
    def __init__(self, mm: MemoryManager, machine: MachineConfig):
        self.mm = mm
        self.machine = machine
        self.events: list[tuple] = []

    # -- plan construction -----------------------------------------------

    def demotion_scan_size(self, c: Container) -> int:
        n_lru = c.local_usage
        return eq_demotion_scan(n_lru, c.local_usage, c.lower_protection)

    def _approach_extra(self, c: Container) -> int:
        if c.upper_bound is None or c.local_usage <= c.lower_protection:
            return 0
        headroom = self.machine.bound_headroom(c.upper_bound)
        return max(0, c.local_usage - (c.upper_bound - headroom))

    def build_demotion_plan(self, tick: int) -> DemotionPlan:
        """Exemption flags plus scan sizes for every container, ordered by
        descending overage ratio so the worst offender is scanned first."""
        pressure = self.mm.watermark_state() == WatermarkState.BELOW_LOW
        entries = []
        for c in self.mm.containers:
            exempt = c.local_usage <= c.lower_protection
            d_scan = 0 if (exempt or not pressure) else self.demotion_scan_size(c)
            extra = 0 if exempt else self._approach_extra(c)
            entries.append(PlanEntry(cid=c.cid, d_scan=d_scan, exempt=exempt, approach_extra=extra))
        entries.sort(key=lambda e: (-self.mm.by_id[e.cid].overage_ratio(), self.mm.by_id[e.cid].index))
        return DemotionPlan(tick=tick, watermark_pressure=pressure, entries=entries)

    # -- execution ---------------------------------------------------------

    def run_background_demotion(self, plan: DemotionPlan, tick: int, budget: MigrationBudget) -> int:
        """Demote along the plan until free local memory clears the high
        watermark; per-container bound quotas are honoured regardless.
        Returns the number of pages demoted."""
        mm = self.mm
        machine = self.machine
        total = 0
        for entry in plan.targets():
            c = mm.by_id[entry.cid]
            window_size = max(entry.d_scan, entry.approach_extra)
            if window_size <= 0:
                continue
            ids = mm.pages_sorted_oldest(c, Tier.LOCAL)
            window = ids[:window_size]
            if window.size == 0:
                continue

            act_mask = mm.active[window]
            inactive = window[~act_mask]

            # Second chance only where no protection is configured: a touch
            # since deactivation rescues the page back to the active list.
            if c.lower_protection == 0 and inactive.size:
                touched = mm.last_access[inactive] > mm.deactivated_at[inactive]
                rescued = inactive[touched]
                if rescued.size:
                    mm.activate(rescued, tick)
                inactive = inactive[~touched]

            # Pages deactivated this very tick are not yet eligible; they get
            # one pass of inactive residency first.
            eligible = inactive[mm.deactivated_at[inactive] < tick]

            # Active pages in the window age out instead of being demoted.
            to_age = window[act_mask]
            if to_age.size:
                mm.deactivate(to_age, tick)

            want = entry.approach_extra
            if plan.watermark_pressure:
                to_high = machine.high_watermark - mm.free_local + 1
                if to_high > 0:
                    want = max(want, to_high)
            take = min(eligible.size, want)
            take = budget.take(take)
            if take <= 0:
                continue
            if mm.free_cxl < take:
                take = mm.free_cxl
                if take <= 0:
                    self.events.append(("cxl_full", tick, c.cid))
                    break
                victims = eligible[:take]
                mm.migrate_batch(victims, Tier.CXL, tick)
                budget.spend(take)
                total += take
                self.events.append(("cxl_full", tick, c.cid))
                break
            victims = eligible[:take]
            mm.migrate_batch(victims, Tier.CXL, tick)
            budget.spend(take)
            total += take
        return total

    # -- synchronous bound enforcement --------------------------------------

    def enforce_upper_bound(self, c: Container, requested: int, tick: int) -> int:
        """Demote the container's own LRU tail until `requested` more local
        pages would fit under its upper bound. Runs in bounded batches; a
        full CXL tier cuts it short with a recorded event."""
        if c.upper_bound is None:
            return 0
        freed = 0
        attempts = 0
        while attempts < self.machine.sync_retries:
            over = c.local_usage + requested - c.upper_bound
            if over <= 0:
                break
            attempts += 1
            ids = self.mm.pages_sorted_oldest(c, Tier.LOCAL)
            if ids.size == 0:
                break
            batch = max(requested, ids.size // self.machine.sync_batch_divisor)
            take = min(over, batch, ids.size)
            if self.mm.free_cxl < take:
                take = self.mm.free_cxl
                if take <= 0:
                    self.events.append(("cxl_full", tick, c.cid))
                    break
            victims = ids[:take]
            self.mm.migrate_batch(victims, Tier.CXL, tick, sync=True)
            freed += take
        return freed
