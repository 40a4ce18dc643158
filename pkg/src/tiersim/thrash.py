"""Thrash detection: sampled promotion tracking and multiplier control.

Promotions are sampled into a fixed-size hash table keyed by page number.
A demotion that finds its page in the table within the residency threshold
counts as one thrash event against the owning container. A periodic pass
(default every 5 simulated seconds) clears the table, computes per-container
thrash rates, and halves or doubles each container's promotion multiplier.
Halving only applies to containers in steady state so workloads mid
working-set transition are not penalised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Container, MachineConfig

_HASH_MULT = np.uint64(2654435761)
_HASH_MASK = np.uint64(0xFFFFFFFF)


@dataclass
class ThrashState:
    """Per-container detector bookkeeping between periodic passes."""

    thrash_counter: int = 0
    last_period_counter: int = 0
    active_pages_prev: int = 0
    freed_prev: int = 0


class ThrashDetector:
    def __init__(self, machine: MachineConfig, containers: list[Container], rng: np.random.Generator):
        self.machine = machine
        self.containers = containers
        self.rng = rng
        slots = machine.hash_table_slots
        self.table_page = np.full(slots, -1, dtype=np.int64)
        self.table_tick = np.zeros(slots, dtype=np.int64)
        self.state = {c.cid: ThrashState() for c in containers}
        self.periods_seen = 0

    def _slots(self, ids: np.ndarray) -> np.ndarray:
        mixed = (ids.astype(np.uint64) * _HASH_MULT) & _HASH_MASK
        return (mixed % np.uint64(self.machine.hash_table_slots)).astype(np.int64)

    # -- recording -------------------------------------------------------

    def record_promotion(self, pid: int, tick: int) -> None:
        self.record_promotion_batch(np.array([pid], dtype=np.int64), tick)

    def record_promotion_batch(self, ids: np.ndarray, tick: int) -> None:
        """Sample just-promoted pages into the table; later entries overwrite
        earlier occupants of the same slot."""
        if ids.size == 0:
            return
        rate = self.machine.promo_sample_rate
        if rate <= 0:
            return
        if rate >= 1.0:
            chosen = ids
        else:
            keep = self.rng.random(ids.size) < rate
            chosen = ids[keep]
        if chosen.size == 0:
            return
        slots = self._slots(chosen)
        self.table_page[slots] = chosen
        self.table_tick[slots] = tick

    # -- observation -------------------------------------------------------

    def observe_demotion(self, pid: int, tick: int, owner: Container) -> bool:
        hits = self.observe_demotion_batch(
            np.array([pid], dtype=np.int64),
            np.array([owner.index], dtype=np.int32),
            tick,
        )
        return hits > 0

    def observe_demotion_batch(self, ids: np.ndarray, owners: np.ndarray, tick: int) -> int:
        """Check demoted pages against the table; a hit within t_resident is
        a thrash event. Hits are removed so one cycle counts once."""
        if ids.size == 0:
            return 0
        slots = self._slots(ids)
        resident_ms = (tick - self.table_tick[slots]) * self.machine.tick_length
        hit = (self.table_page[slots] == ids) & (resident_ms < self.machine.t_resident)
        n_hits = int(hit.sum())
        if n_hits == 0:
            return 0
        self.table_page[slots[hit]] = -1
        hit_owners = owners[hit]
        for idx in np.unique(hit_owners):
            c = self.containers[idx]
            k = int((hit_owners == idx).sum())
            c.counters.thrash_events += k
            self.state[c.cid].thrash_counter += k
        return n_hits

    # -- periodic control ----------------------------------------------------

    def is_steady_state(self, c: Container, active_now: int) -> bool:
        """Steady when active-page count and freeing rate both sit below their
        thresholds. Containers are never steady in their first two periods."""
        if self.periods_seen < 3:
            return False
        st = self.state[c.cid]
        delta_active = abs(active_now - st.active_pages_prev)
        if delta_active > self.machine.steady_active_delta * max(active_now, 1):
            return False
        freed_rate = (c.counters.freed - st.freed_prev) / self.machine.period_seconds
        return freed_rate <= self.machine.resolved_steady_free_rate()

    def periodic_update(self, tick: int, active_counts: dict[str, int]) -> dict[str, float]:
        """Period-boundary pass: clear the table, evaluate rates, and adjust
        multipliers by at most a factor of two. Returns the new multipliers."""
        self.periods_seen += 1
        self.table_page.fill(-1)

        decisions: dict[str, float] = {}
        floor = self.machine.multiplier_floor
        for c in self.containers:
            st = self.state[c.cid]
            rate = (st.thrash_counter - st.last_period_counter) / self.machine.period_seconds
            steady = self.is_steady_state(c, active_counts[c.cid])
            c.steady_state = steady

            if self.machine.thrash_mitigation_enabled:
                if rate > self.machine.r_thrashing and steady:
                    c.promo_multiplier = max(c.promo_multiplier / 2.0, floor)
                elif rate <= self.machine.r_thrashing and c.promo_multiplier < 1.0:
                    c.promo_multiplier = min(c.promo_multiplier * 2.0, 1.0)

            st.last_period_counter = st.thrash_counter
            st.active_pages_prev = active_counts[c.cid]
            st.freed_prev = c.counters.freed
            decisions[c.cid] = c.promo_multiplier
        return decisions
