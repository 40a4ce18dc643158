"""Page allocation, access recording, LRU maintenance, and migration.

Page state lives in flat numpy arrays indexed by page id so bulk access
recording and scan passes stay vectorised. LRU lists are derived views:
ordering is the per-page `lru_key` sequence number, bumped whenever a page
is placed, promoted, or touched while active, so "tail" always means
least-recently-ordered.

Hot-page discovery uses a paired-touch filter: a page qualifies when two
accesses land within `hint_window` ticks of each other. Pairing state is
reset when a page is deactivated or migrated, so a page must prove its
hotness afresh after either event (deactivation clears reference state,
mirroring how reclaim scanning resets the referenced bit).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    Container,
    DestinationFull,
    MachineConfig,
    NotOwner,
    OutOfMemory,
    Tier,
)

NEVER = np.int64(-(1 << 60))

_TIER_NONE = -1
_TIER_LOCAL = int(Tier.LOCAL)
_TIER_CXL = int(Tier.CXL)


class WatermarkState(Enum):
    ABOVE_HIGH = "above_high"
    BELOW_HIGH = "below_high"
    BELOW_LOW = "below_low"


@dataclass(frozen=True)
class Page:
    """Point-in-time view of one page."""

    pid: int
    owner: str
    tier: Tier
    last_access: int
    active: bool


@dataclass(frozen=True)
class LruList:
    """Active/inactive page ids for one (container, tier), most recent first."""

    active: np.ndarray
    inactive: np.ndarray


class MemoryManager:
    """Owns all page state plus per-container usage accounting.

    `on_promote(ids, tick)` and `on_demote(ids, owners, tick)` hooks let the
    thrash detector observe migrations without a module cycle.
    """

    def __init__(
        self,
        machine: MachineConfig,
        containers: list[Container],
        record_trace: bool = False,
    ):
        self.machine = machine
        self.containers = containers
        self.by_id = {c.cid: c for c in containers}
        self.on_promote = None
        self.on_demote = None
        # Installed by the driver; demotes a container's own LRU tail before
        # an allocation crosses its upper bound.
        self.sync_demoter = None

        self._cap = 1024
        self.owner = np.full(self._cap, -1, dtype=np.int32)
        self.tier = np.full(self._cap, _TIER_NONE, dtype=np.int8)
        self.last_access = np.full(self._cap, NEVER, dtype=np.int64)
        self.lru_key = np.zeros(self._cap, dtype=np.int64)
        self.active = np.zeros(self._cap, dtype=bool)
        self.deactivated_at = np.full(self._cap, NEVER, dtype=np.int64)
        self.pair_prev = np.full(self._cap, NEVER, dtype=np.int64)
        self.candidate = np.zeros(self._cap, dtype=bool)
        self.candidate_time = np.full(self._cap, NEVER, dtype=np.int64)

        self.next_pid = 0
        self._seq = 0
        self.local_used = 0
        self.cxl_used = 0
        self.total_migrations = 0

        # Trace entries appended in execution order:
        #   ("place", tick, ids, tiers) / ("access", tick, ids) /
        #   ("migrate", tick, ids, dest_tier) / ("free", tick, ids)
        self.record_trace = record_trace
        self.trace: list[tuple] = []

    # -- capacity bookkeeping ------------------------------------------------

    @property
    def free_local(self) -> int:
        return self.machine.local_capacity - self.local_used

    @property
    def free_cxl(self) -> int:
        return self.machine.cxl_capacity - self.cxl_used

    def watermark_state(self) -> WatermarkState:
        free = self.free_local
        if free <= self.machine.low_watermark:
            return WatermarkState.BELOW_LOW
        if free > self.machine.high_watermark:
            return WatermarkState.ABOVE_HIGH
        return WatermarkState.BELOW_HIGH

    def _grow(self, needed: int) -> None:
        new_cap = self._cap
        while new_cap < needed:
            new_cap *= 2
        grow = new_cap - self._cap
        self.owner = np.concatenate([self.owner, np.full(grow, -1, dtype=np.int32)])
        self.tier = np.concatenate([self.tier, np.full(grow, _TIER_NONE, dtype=np.int8)])
        self.last_access = np.concatenate([self.last_access, np.full(grow, NEVER, dtype=np.int64)])
        self.lru_key = np.concatenate([self.lru_key, np.zeros(grow, dtype=np.int64)])
        self.active = np.concatenate([self.active, np.zeros(grow, dtype=bool)])
        self.deactivated_at = np.concatenate([self.deactivated_at, np.full(grow, NEVER, dtype=np.int64)])
        self.pair_prev = np.concatenate([self.pair_prev, np.full(grow, NEVER, dtype=np.int64)])
        self.candidate = np.concatenate([self.candidate, np.zeros(grow, dtype=bool)])
        self.candidate_time = np.concatenate([self.candidate_time, np.full(grow, NEVER, dtype=np.int64)])
        self._cap = new_cap

    def _next_keys(self, n: int) -> np.ndarray:
        keys = np.arange(self._seq, self._seq + n, dtype=np.int64)
        self._seq += n
        return keys

    # -- allocation and freeing ----------------------------------------------

    def allocate(self, cid: str, n: int, tick: int) -> np.ndarray:
        """Place n new pages for `cid`, local tier first.

        Local placement happens while free local stays above the low
        watermark and the container's upper bound is not reached; the rest
        falls back to CXL. A request that would cross the upper bound first
        runs synchronous demotion of the container's own LRU tail (wired in
        by the driver through `sync_demoter`). When CXL is full, remaining
        pages may dip into the local watermark reserve before OutOfMemory.
        """
        c = self.by_id[cid]
        if n <= 0:
            return np.empty(0, dtype=np.int64)

        if c.upper_bound is not None and c.local_usage + n > c.upper_bound:
            if self.sync_demoter is not None:
                self.sync_demoter(c, n, tick)

        bound_room = n
        if c.upper_bound is not None:
            bound_room = max(0, c.upper_bound - c.local_usage)

        local_pref = max(0, self.free_local - self.machine.low_watermark)
        local_n = min(n, bound_room, local_pref)
        cxl_n = min(n - local_n, self.free_cxl)
        # Last resort: dip into the watermark reserve rather than fail while
        # local frames still exist (and the bound still allows them).
        dip_n = min(n - local_n - cxl_n, self.free_local - local_n, bound_room - local_n)
        dip_n = max(0, dip_n)
        placed_n = local_n + cxl_n + dip_n
        shortfall = n - placed_n

        ids = np.arange(self.next_pid, self.next_pid + placed_n, dtype=np.int64)
        self.next_pid += placed_n
        if self.next_pid > self._cap:
            self._grow(self.next_pid)

        tiers = np.empty(placed_n, dtype=np.int8)
        tiers[:local_n] = _TIER_LOCAL
        tiers[local_n:local_n + cxl_n] = _TIER_CXL
        tiers[local_n + cxl_n:] = _TIER_LOCAL

        self.owner[ids] = c.index
        self.tier[ids] = tiers
        self.last_access[ids] = tick
        self.lru_key[ids] = self._next_keys(placed_n)
        self.active[ids] = True
        self.deactivated_at[ids] = NEVER
        self.pair_prev[ids] = NEVER
        self.candidate[ids] = False

        n_local = local_n + dip_n
        c.local_usage += n_local
        c.cxl_usage += cxl_n
        self.local_used += n_local
        self.cxl_used += cxl_n
        c.counters.cxl_fallback_allocs += cxl_n

        if self.record_trace:
            self.trace.append(("place", tick, ids.copy(), tiers.copy()))

        if shortfall > 0:
            raise OutOfMemory(cid, shortfall, ids)
        return ids

    def free_pages(self, cid: str, ids: np.ndarray) -> None:
        c = self.by_id[cid]
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            return
        if not np.all(self.owner[ids] == c.index):
            raise NotOwner(f"{cid} does not own all pages being freed")
        tiers = self.tier[ids]
        n_local = int((tiers == _TIER_LOCAL).sum())
        n_cxl = int((tiers == _TIER_CXL).sum())
        self.owner[ids] = -1
        self.tier[ids] = _TIER_NONE
        self.candidate[ids] = False
        c.local_usage -= n_local
        c.cxl_usage -= n_cxl
        self.local_used -= n_local
        self.cxl_used -= n_cxl
        c.counters.freed += ids.size
        if self.record_trace:
            self.trace.append(("free", None, ids.copy()))

    # -- access recording ----------------------------------------------------

    def record_access(self, cid: str, pid: int, tick: int) -> bool:
        """Record one access; True when it triggered a hint-fault event."""
        c = self.by_id[cid]
        if self.owner[pid] != c.index:
            raise NotOwner(f"{cid} does not own page {pid}")
        return self.record_access_batch(cid, np.array([pid], dtype=np.int64), tick) > 0

    def record_access_batch(
        self, cid: str, ids: np.ndarray, tick: int, touches: int = 1
    ) -> int:
        """Vectorised access recording; returns the hint-fault event count.

        Paired-touch rules: an inactive page is activated when this access
        lands within hint_window of its previous paired touch; a CXL page
        meeting the same test becomes a promotion candidate and counts one
        hint fault per qualifying access.
        """
        c = self.by_id[cid]
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            return 0
        if not np.all(self.owner[ids] == c.index):
            raise NotOwner(f"{cid} does not own all pages being accessed")
        faults = 0
        for _ in range(touches):
            faults += self._touch(c, ids, tick)
        return faults

    def _touch(self, c: Container, ids: np.ndarray, tick: int) -> int:
        window = self.machine.hint_window
        tiers = self.tier[ids]
        cxl_mask = tiers == _TIER_CXL
        n_cxl = int(cxl_mask.sum())
        c.counters.cxl_accesses += n_cxl
        c.counters.local_accesses += ids.size - n_cxl

        paired = (tick - self.pair_prev[ids]) <= window

        qual_cxl = cxl_mask & paired
        if qual_cxl.any():
            hot = ids[qual_cxl]
            self.candidate[hot] = True
            self.candidate_time[hot] = tick
            c.counters.hint_faults += int(qual_cxl.sum())

        inactive = ~self.active[ids]
        reactivate = inactive & paired
        if reactivate.any():
            woken = ids[reactivate]
            self.active[woken] = True
            self.lru_key[woken] = self._next_keys(woken.size)

        # Pairing state advances for CXL pages always and for local pages
        # only while inactive; touches of active local pages are plain LRU
        # refreshes.
        upd = cxl_mask | inactive
        if upd.any():
            self.pair_prev[ids[upd]] = tick

        was_active = self.active[ids] & ~reactivate
        if was_active.any():
            keep = ids[was_active]
            self.lru_key[keep] = self._next_keys(keep.size)

        self.last_access[ids] = tick

        if self.record_trace:
            self.trace.append(("access", tick, ids.copy()))
        return int(qual_cxl.sum())

    # -- LRU maintenance -----------------------------------------------------

    def age_lrus(self, tick: int) -> None:
        """Move pages idle beyond the aging horizon to the inactive list."""
        horizon = self.machine.aging_horizon
        stale = self.active & (self.owner >= 0) & (self.last_access < tick - horizon)
        if stale.any():
            self.deactivate(np.flatnonzero(stale).astype(np.int64), tick)

    def deactivate(self, ids: np.ndarray, tick: int) -> None:
        self.active[ids] = False
        self.deactivated_at[ids] = tick
        self.pair_prev[ids] = NEVER

    def activate(self, ids: np.ndarray, tick: int) -> None:
        self.active[ids] = True
        self.lru_key[ids] = self._next_keys(ids.size)

    # -- migration -----------------------------------------------------------

    def migrate(self, pid: int, destination: Tier, tick: int) -> None:
        """Move a single page across tiers; checked variant of the batch op."""
        if self.owner[pid] < 0:
            raise NotOwner(f"page {pid} is not allocated")
        if self.tier[pid] == int(destination):
            raise DestinationFull(f"page {pid} already on {destination.name}")
        if destination == Tier.LOCAL and self.free_local <= 0:
            raise DestinationFull("no free local frame")
        if destination == Tier.CXL and self.free_cxl <= 0:
            raise DestinationFull("no free CXL frame")
        self.migrate_batch(np.array([pid], dtype=np.int64), destination, tick)

    def migrate_batch(self, ids: np.ndarray, destination: Tier, tick: int, sync: bool = False) -> None:
        """Flip tier for `ids` (all currently on the other tier).

        Demotions land on the destination inactive list head (they were cold
        by construction); promotions land on the active list head. Owner
        counters update per page; the promote/demote hooks fire for the
        thrash detector.
        """
        if ids.size == 0:
            return
        owners = self.owner[ids]
        if destination == Tier.CXL:
            self.tier[ids] = _TIER_CXL
            self.active[ids] = False
            self.deactivated_at[ids] = tick
            moved_local = ids.size
            self.local_used -= moved_local
            self.cxl_used += moved_local
            for idx in np.unique(owners):
                c = self.containers[idx]
                k = int((owners == idx).sum())
                c.local_usage -= k
                c.cxl_usage += k
                c.counters.demoted += k
                if sync:
                    c.counters.sync_demotions += k
        else:
            self.tier[ids] = _TIER_LOCAL
            self.active[ids] = True
            moved = ids.size
            self.cxl_used -= moved
            self.local_used += moved
            for idx in np.unique(owners):
                c = self.containers[idx]
                k = int((owners == idx).sum())
                c.cxl_usage -= k
                c.local_usage += k
                c.counters.promoted += k
        self.lru_key[ids] = self._next_keys(ids.size)
        self.pair_prev[ids] = NEVER
        self.candidate[ids] = False
        self.total_migrations += ids.size

        if self.record_trace:
            self.trace.append(("migrate", tick, ids.copy(), int(destination)))

        if destination == Tier.CXL and self.on_demote is not None:
            self.on_demote(ids, owners, tick)
        if destination == Tier.LOCAL and self.on_promote is not None:
            self.on_promote(ids, tick)

    # -- views ---------------------------------------------------------------

    def pages_of(self, c: Container, tier: Tier) -> np.ndarray:
        mask = (self.owner == c.index) & (self.tier == int(tier))
        return np.flatnonzero(mask).astype(np.int64)

    def pages_sorted_oldest(self, c: Container, tier: Tier) -> np.ndarray:
        """Container pages on `tier`, LRU order: oldest lru_key first."""
        ids = self.pages_of(c, tier)
        if ids.size == 0:
            return ids
        order = np.argsort(self.lru_key[ids], kind="stable")
        return ids[order]

    def lru_lists(self, cid: str, tier: Tier) -> LruList:
        c = self.by_id[cid]
        ids = self.pages_of(c, tier)
        order = np.argsort(-self.lru_key[ids], kind="stable")
        ids = ids[order]
        act = self.active[ids]
        return LruList(active=ids[act], inactive=ids[~act])

    def get_page(self, pid: int) -> Page:
        if self.owner[pid] < 0:
            raise NotOwner(f"page {pid} is not allocated")
        return Page(
            pid=int(pid),
            owner=self.containers[self.owner[pid]].cid,
            tier=Tier(int(self.tier[pid])),
            last_access=int(self.last_access[pid]),
            active=bool(self.active[pid]),
        )
