"""Shared data model: tiers, containers, machine configuration, validation.

Everything is counted in pages internally. Scenario files may express sizes
in bytes (e.g. "120MiB"); conversion happens at parse time using the
configured page size.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import IntEnum


class Tier(IntEnum):
    """The two memory tiers: LOCAL is the fast tier, CXL the capacity tier."""

    LOCAL = 0
    CXL = 1


class SimError(Exception):
    """Base class for simulator errors."""


class InvalidConfig(SimError):
    """Raised by validate_config with the full list of violations."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class NotOwner(SimError):
    """A page operation was attempted by a container that does not own it."""


class OutOfMemory(SimError):
    """Both tiers are exhausted. Carries the pages that were still placed."""

    def __init__(self, container_id: str, shortfall: int, placed):
        self.container_id = container_id
        self.shortfall = shortfall
        self.placed = placed
        super().__init__(f"out of memory: {container_id} short {shortfall} pages")


class DestinationFull(SimError):
    """Migration target tier has no free frame."""


@dataclass
class TierCounters:
    """Per-container tiering activity counters. All monotonically non-decreasing.

    `demoted` counts every demotion of the container's pages, including the
    synchronous ones; `sync_demotions` counts the synchronous subset again
    so upper-bound pressure is visible on its own.
    """

    demoted: int = 0
    promoted: int = 0
    promotion_attempts: int = 0
    hint_faults: int = 0
    sync_demotions: int = 0
    cxl_fallback_allocs: int = 0
    thrash_events: int = 0
    freed: int = 0
    local_accesses: int = 0
    cxl_accesses: int = 0


@dataclass
class Container:
    """Runtime state of one tenant."""

    cid: str
    index: int
    lower_protection: int
    upper_bound: int | None = None
    local_usage: int = 0
    cxl_usage: int = 0
    counters: TierCounters = field(default_factory=TierCounters)
    promo_multiplier: float = 1.0
    throttled: bool = False
    steady_state: bool = False

    @property
    def total_usage(self) -> int:
        return self.local_usage + self.cxl_usage

    def overage_ratio(self) -> float:
        """Local usage relative to protection; inf for unprotected usage."""
        if self.lower_protection <= 0:
            return float("inf") if self.local_usage > 0 else 0.0
        return self.local_usage / self.lower_protection


@dataclass(frozen=True)
class MachineConfig:
    """Static machine and policy parameters.

    Times are simulated milliseconds; capacities and watermarks are pages.
    Defaults put one detector period at 5 simulated seconds
    (50 ticks x 100 ms).
    """

    local_capacity: int
    cxl_capacity: int
    rng_seed: int
    page_size: int = 4096
    low_watermark: int = 64
    high_watermark: int = 256
    tick_length: int = 100
    promo_scan_interval: int = 10
    demote_scan_interval: int = 10
    detector_period: int = 50
    t_resident: int = 10_000
    r_thrashing: float = 1000.0
    hash_table_slots: int = 65_536
    promo_sample_rate: float = 0.125
    p_base_fraction: float = 0.125
    multiplier_floor: float = 1.0 / 64.0
    hint_window: int = 20
    aging_horizon: int = 50
    steady_active_delta: float = 0.05
    steady_free_rate: float | None = None
    migration_cap: int = 0
    bound_headroom_fraction: float = 0.02
    sync_batch_divisor: int = 100
    sync_retries: int = 3
    throttle_enabled: bool = True
    thrash_mitigation_enabled: bool = True

    @property
    def tick_seconds(self) -> float:
        return self.tick_length / 1000.0

    @property
    def period_seconds(self) -> float:
        return self.detector_period * self.tick_seconds

    def resolved_steady_free_rate(self) -> float:
        # Default: 1% of local capacity per second counts as quiescent freeing.
        if self.steady_free_rate is not None:
            return self.steady_free_rate
        return 0.01 * self.local_capacity

    def bound_headroom(self, upper_bound: int) -> int:
        return max(1, int(upper_bound * self.bound_headroom_fraction))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ContainerSpec:
    """Per-container scenario parameters (policy only, no workload)."""

    cid: str
    lower_protection: int
    upper_bound: int | None = None


def validate_config(machine: MachineConfig, containers: list[ContainerSpec]) -> None:
    """Check every scenario-wide constraint; raise InvalidConfig listing all
    violations at once so a bad scenario file can be fixed in one pass."""
    violations: list[str] = []
    if machine.local_capacity <= 0:
        violations.append("local_capacity must be positive")
    if machine.cxl_capacity < 0:
        violations.append("cxl_capacity must be non-negative")
    if not (0 < machine.low_watermark < machine.high_watermark < machine.local_capacity):
        violations.append(
            "watermark ordering violated: need 0 < low_watermark < high_watermark"
            f" < local_capacity, got {machine.low_watermark}/{machine.high_watermark}"
            f"/{machine.local_capacity}"
        )
    if machine.tick_length <= 0:
        violations.append("tick_length must be positive")
    if machine.page_size <= 0:
        violations.append("page_size must be positive")
    for name in ("promo_scan_interval", "demote_scan_interval", "detector_period"):
        if getattr(machine, name) <= 0:
            violations.append(f"{name} must be positive")
    if not (0 < machine.promo_sample_rate <= 1):
        violations.append("promo_sample_rate must be in (0, 1]")
    if not (0 < machine.p_base_fraction <= 1):
        violations.append("p_base_fraction must be in (0, 1]")
    if not (0 < machine.multiplier_floor <= 1):
        violations.append("multiplier_floor must be in (0, 1]")
    if machine.hash_table_slots <= 0:
        violations.append("hash_table_slots must be positive")

    seen: set[str] = set()
    for spec in containers:
        if spec.cid in seen:
            violations.append(f"duplicate container id {spec.cid!r}")
        seen.add(spec.cid)
        if spec.lower_protection < 0:
            violations.append(f"{spec.cid}: lower_protection must be non-negative")
        if spec.lower_protection > machine.local_capacity:
            violations.append(
                f"{spec.cid}: lower_protection {spec.lower_protection} exceeds"
                f" local capacity {machine.local_capacity}"
            )
        if spec.upper_bound is not None:
            if spec.upper_bound <= 0:
                violations.append(f"{spec.cid}: upper_bound must be positive")
            if spec.upper_bound < spec.lower_protection:
                violations.append(
                    f"{spec.cid}: bound ordering violated, upper_bound"
                    f" {spec.upper_bound} < lower_protection {spec.lower_protection}"
                )

    if violations:
        raise InvalidConfig(violations)
