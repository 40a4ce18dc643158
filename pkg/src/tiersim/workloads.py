"""Deterministic synthetic workload generators.

Four archetypes:

* streaming  - allocate the footprint once, then sweep the hot subset in
  sequential passes. Hotness h means every hot page is touched h times per
  simulated second, so the revisit gap is 1/h seconds exactly.
* bursty     - follow a (tick, target_footprint) profile, allocating and
  freeing to hit each target, with a background sweep over live pages.
* thrashing  - walk the footprint block by block, touching each block twice
  in one tick (enough to pass the paired-touch promotion filter) and not
  again until the walk wraps, so promoted pages go cold immediately.
* idle       - no operations.

Hot pages are spread evenly across the footprint so a partial spill to the
capacity tier always strands a proportional slice of the hot set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str  # streaming | bursty | thrashing | idle
    footprint: int = 0
    hotness: float = 1.0
    hot_fraction: float = 1.0
    launch_delay: int = 0
    burst_profile: tuple[tuple[int, int], ...] = ()
    block_size: int = 256

    def __post_init__(self):
        if self.kind not in ("streaming", "bursty", "thrashing", "idle"):
            raise ValueError(f"unknown workload kind {self.kind!r}")
        if self.kind != "idle" and self.footprint <= 0:
            raise ValueError("footprint must be positive")
        if self.launch_delay < 0:
            raise ValueError("launch_delay must be non-negative")
        if not (0 < self.hot_fraction <= 1):
            raise ValueError("hot_fraction must be in (0, 1]")


@dataclass
class AllocRequest:
    pages: int


@dataclass
class FreeRequest:
    pages: int


@dataclass
class AccessRequest:
    # Logical positions into the container's live pages, allocation order.
    positions: np.ndarray
    touches: int = 1


def evenly_spaced(count: int, total: int) -> np.ndarray:
    """`count` indices spread evenly over range(total)."""
    return (np.arange(count, dtype=np.int64) * total) // count


class Workload:
    """Base generator; subclasses emit per-tick request lists."""

    def __init__(self, spec: WorkloadSpec, tick_seconds: float):
        self.spec = spec
        self.tick_seconds = tick_seconds
        self.live = 0
        self.terminated = False

    def step(self, tick: int, rng: np.random.Generator) -> list:
        if self.terminated or tick < self.spec.launch_delay:
            return []
        return self._step(tick, rng)

    def _step(self, tick: int, rng: np.random.Generator) -> list:
        raise NotImplementedError


class IdleWorkload(Workload):
    def _step(self, tick, rng):
        return []


class StreamingWorkload(Workload):
    def __init__(self, spec: WorkloadSpec, tick_seconds: float):
        super().__init__(spec, tick_seconds)
        self.hot_count = max(1, round(spec.footprint * spec.hot_fraction))
        self.hot_idx = evenly_spaced(self.hot_count, spec.footprint)
        self.cursor = 0
        self._acc = 0.0

    def _sweep(self) -> list:
        self._acc += self.spec.hotness * self.hot_count * self.tick_seconds
        budget = int(self._acc)
        self._acc -= budget
        budget = min(budget, self.hot_count)  # one full sweep per tick at most
        if budget <= 0:
            return []
        pos = self.hot_idx[(self.cursor + np.arange(budget, dtype=np.int64)) % self.hot_count]
        self.cursor = (self.cursor + budget) % self.hot_count
        return [AccessRequest(positions=pos)]

    def _step(self, tick, rng):
        ops = []
        if self.live == 0:
            ops.append(AllocRequest(pages=self.spec.footprint))
            self.live = self.spec.footprint
        ops.extend(self._sweep())
        return ops


class BurstyWorkload(Workload):
    def __init__(self, spec: WorkloadSpec, tick_seconds: float):
        super().__init__(spec, tick_seconds)
        self.profile = sorted(spec.burst_profile)
        self.next_entry = 0
        self.cursor = 0
        self._acc = 0.0

    def _step(self, tick, rng):
        ops = []
        if self.live == 0 and not self.profile:
            ops.append(AllocRequest(pages=self.spec.footprint))
            self.live = self.spec.footprint
        while self.next_entry < len(self.profile) and self.profile[self.next_entry][0] <= tick:
            target = self.profile[self.next_entry][1]
            delta = target - self.live
            if delta > 0:
                ops.append(AllocRequest(pages=delta))
            elif delta < 0:
                ops.append(FreeRequest(pages=-delta))
            self.live = target
            self.next_entry += 1
        if self.live > 0:
            hot = max(1, round(self.live * self.spec.hot_fraction))
            self._acc += self.spec.hotness * hot * self.tick_seconds
            budget = int(self._acc)
            self._acc -= budget
            budget = min(budget, self.live)
            if budget > 0:
                pos = (self.cursor + np.arange(budget, dtype=np.int64)) % self.live
                self.cursor = (self.cursor + budget) % self.live
                ops.append(AccessRequest(positions=pos))
        return ops


class ThrashingWorkload(Workload):
    """Each block is touched twice in one tick, then left cold until the walk
    wraps the whole footprint; the wrap takes footprint/block_size ticks,
    far beyond demotion latency in the shipped scenarios."""

    def __init__(self, spec: WorkloadSpec, tick_seconds: float):
        super().__init__(spec, tick_seconds)
        self.block = max(1, min(spec.block_size, spec.footprint))
        self.cursor = 0

    def _step(self, tick, rng):
        ops = []
        if self.live == 0:
            ops.append(AllocRequest(pages=self.spec.footprint))
            self.live = self.spec.footprint
        pos = (self.cursor + np.arange(self.block, dtype=np.int64)) % self.spec.footprint
        self.cursor = (self.cursor + self.block) % self.spec.footprint
        ops.append(AccessRequest(positions=pos, touches=2))
        return ops


_KINDS = {
    "streaming": StreamingWorkload,
    "bursty": BurstyWorkload,
    "thrashing": ThrashingWorkload,
    "idle": IdleWorkload,
}


def build_workload(spec: WorkloadSpec, tick_seconds: float) -> Workload:
    return _KINDS[spec.kind](spec, tick_seconds)


def next_ops(workload: Workload, tick: int, rng: np.random.Generator) -> list:
    """Request stream for one tick; empty before launch_delay or after
    termination."""
    return workload.step(tick, rng)
