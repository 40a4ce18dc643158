"""Promotion of hot CXL pages under fourth-power throttling.

A container is promotion-throttled when it sits above its lower protection
while local memory is fully utilised, or when it is near or over its upper
bound. Throttled containers scan at p_base * (protection/usage)^4 with a
floor of one sixteenth of p_base, so mild overage barely slows promotion
while heavy overage backs off fast without ever starving. The thrash
detector's multiplier stacks on top and can push the effective rate lower.
"""

from __future__ import annotations

import numpy as np

from .model import Container, MachineConfig
from .memory import MemoryManager, Tier, WatermarkState
from .demotion import DemotionEngine, MigrationBudget

THROTTLE_FLOOR = 1.0 / 16.0

# Minimum unthrottled scan while any CXL pages remain; without it the
# fractional budget decays with the remaining spill and the tail never
# finishes promoting.
P_BASE_FLOOR_PAGES = 64


def throttle_factor(local_usage: int, lower_protection: int) -> float:
    """Fourth-power slowdown with the one-sixteenth floor, for a container
    whose throttle flag is set."""
    if local_usage <= 0:
        return 1.0
    ratio = lower_protection / local_usage
    return min(1.0, max(ratio**4, THROTTLE_FLOOR))


class PromotionEngine:
    def __init__(self, mm: MemoryManager, machine: MachineConfig, demotion: DemotionEngine):
        self.mm = mm
        self.machine = machine
        self.demotion = demotion

    # -- throttle evaluation ---------------------------------------------

    def promotion_throttled(self, c: Container, watermark: WatermarkState) -> bool:
        """Evaluate and store the container's throttle flag."""
        if not self.machine.throttle_enabled:
            c.throttled = False
            return False
        over_protected = (
            c.local_usage > c.lower_protection and watermark != WatermarkState.ABOVE_HIGH
        )
        near_bound = False
        if c.upper_bound is not None:
            headroom = self.machine.bound_headroom(c.upper_bound)
            near_bound = c.local_usage >= c.upper_bound - headroom
        c.throttled = over_protected or near_bound
        return c.throttled

    def p_base(self, c: Container) -> int:
        """Unthrottled scan budget: a fraction of the CXL-resident footprint,
        never rounded to nothing while CXL pages remain."""
        if c.cxl_usage <= 0:
            return 0
        return max(P_BASE_FLOOR_PAGES, int(self.machine.p_base_fraction * c.cxl_usage))

    def promotion_scan_size(self, c: Container) -> int:
        """Effective scan size: p_base, throttled by the fourth-power curve
        when flagged, always scaled by the thrash multiplier."""
        base = self.p_base(c)
        if base == 0:
            return 0
        factor = throttle_factor(c.local_usage, c.lower_protection) if c.throttled else 1.0
        scan = int(base * factor * c.promo_multiplier)
        if scan == 0 and c.promo_multiplier > 0:
            scan = 1
        return scan

    # -- candidate collection ------------------------------------------------

    def collect_candidates(self, c: Container, budget: int, tick: int) -> np.ndarray:
        """Up to `budget` CXL pages that passed the paired-touch filter,
        most recently hot first. Counts promotion attempts."""
        if budget <= 0:
            return np.empty(0, dtype=np.int64)
        mm = self.mm
        mask = (mm.owner == c.index) & (mm.tier == int(Tier.CXL)) & mm.candidate
        ids = np.flatnonzero(mask).astype(np.int64)
        if ids.size == 0:
            return ids
        order = np.lexsort((ids, -mm.candidate_time[ids]))
        picked = ids[order][:budget]
        c.counters.promotion_attempts += picked.size
        return picked

    # -- the promotion pass ----------------------------------------------------

    def run_promotion(self, tick: int, budget: MigrationBudget) -> int:
        """One promotion pass over every container, least-overloaded first.

        Candidates are promoted into frames above the low watermark; a
        container at its upper bound first demotes its own LRU tail to make
        room. Skipped candidates stay candidates for the next pass.
        """
        mm = self.mm
        watermark = mm.watermark_state()
        total = 0
        order = sorted(mm.containers, key=lambda c: (c.overage_ratio(), c.index))
        for c in order:
            self.promotion_throttled(c, watermark)
            scan = self.promotion_scan_size(c)
            picked = self.collect_candidates(c, scan, tick)
            if picked.size == 0:
                continue

            take = budget.take(picked.size)
            if take <= 0:
                continue
            picked = picked[:take]

            if c.upper_bound is not None and c.local_usage + picked.size > c.upper_bound:
                self.demotion.enforce_upper_bound(c, picked.size, tick)
                room = max(0, c.upper_bound - c.local_usage)
                picked = picked[:room]
                if picked.size == 0:
                    continue

            frames = max(0, mm.free_local - self.machine.low_watermark)
            if picked.size > frames:
                picked = picked[:frames]
            if picked.size == 0:
                continue

            mm.migrate_batch(picked, Tier.LOCAL, tick)
            budget.spend(picked.size)
            total += picked.size
            watermark = mm.watermark_state()
        return total
