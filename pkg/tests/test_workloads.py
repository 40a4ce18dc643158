import numpy as np
import pytest

from tiersim.memory import MemoryManager
from tiersim.workloads import (
    AccessRequest,
    AllocRequest,
    FreeRequest,
    WorkloadSpec,
    build_workload,
    evenly_spaced,
    next_ops,
)

from conftest import make_containers, make_machine

TICK_SECONDS = 0.1


def collect_stream(spec, ticks, seed=1):
    w = build_workload(spec, TICK_SECONDS)
    rng = np.random.default_rng(seed)
    out = []
    for tick in range(ticks):
        out.append(next_ops(w, tick, rng))
    return out


def flatten_accesses(stream):
    pos = []
    for ops in stream:
        for op in ops:
            if isinstance(op, AccessRequest):
                for _ in range(op.touches):
                    pos.append(op.positions)
    return np.concatenate(pos) if pos else np.empty(0, dtype=np.int64)


def test_spec_rejects_unknown_kind():
    with pytest.raises(ValueError):
        WorkloadSpec(kind="zigzag", footprint=10)


def test_evenly_spaced_covers_range_uniquely():
    idx = evenly_spaced(40, 80)
    assert idx.size == 40
    assert len(set(idx.tolist())) == 40
    assert idx.max() < 80


def test_streaming_allocates_once_then_sweeps():
    spec = WorkloadSpec(kind="streaming", footprint=1000, hotness=1.0)
    stream = collect_stream(spec, 30)
    allocs = [op for ops in stream for op in ops if isinstance(op, AllocRequest)]
    assert len(allocs) == 1 and allocs[0].pages == 1000
    # hotness 1.0 over 1000 hot pages: 100 touches per 100 ms tick
    accesses = [op for op in stream[5] if isinstance(op, AccessRequest)]
    assert accesses[0].positions.size == 100


def test_streaming_sequential_pass_revisit_gap():
    spec = WorkloadSpec(kind="streaming", footprint=1000, hotness=0.5)
    stream = collect_stream(spec, 45)
    pos = flatten_accesses(stream)
    # every page is revisited exactly 1/h seconds = 20 ticks apart
    first = np.flatnonzero(pos == 0)
    assert first.size >= 2
    assert first[1] - first[0] == 1000  # one full sweep between touches


def test_launch_delay_suppresses_ops():
    spec = WorkloadSpec(kind="streaming", footprint=100, hotness=1.0, launch_delay=300)
    stream = collect_stream(spec, 301)
    assert all(not ops for ops in stream[:300])
    assert any(isinstance(op, AllocRequest) for op in stream[300])


def test_identical_spec_and_seed_identical_streams():
    spec = WorkloadSpec(kind="thrashing", footprint=5000, block_size=128)
    s1 = collect_stream(spec, 50, seed=9)
    s2 = collect_stream(spec, 50, seed=9)
    for ops1, ops2 in zip(s1, s2):
        assert len(ops1) == len(ops2)
        for a, b in zip(ops1, ops2):
            assert type(a) is type(b)
            if isinstance(a, AccessRequest):
                assert np.array_equal(a.positions, b.positions)
                assert a.touches == b.touches


def test_thrashing_touches_each_block_twice_then_moves_on():
    spec = WorkloadSpec(kind="thrashing", footprint=1000, block_size=100)
    stream = collect_stream(spec, 12)
    acc = [op for ops in stream for op in ops if isinstance(op, AccessRequest)]
    assert all(op.touches == 2 for op in acc)
    assert np.array_equal(acc[0].positions, np.arange(100))
    assert np.array_equal(acc[1].positions, np.arange(100, 200))
    # wrap after footprint/block ticks
    assert np.array_equal(acc[10].positions, np.arange(100))


def test_bursty_follows_profile():
    spec = WorkloadSpec(
        kind="bursty", footprint=400, hotness=1.0,
        burst_profile=((0, 100), (10, 400), (20, 150)),
    )
    w = build_workload(spec, TICK_SECONDS)
    rng = np.random.default_rng(0)
    live = 0
    for tick in range(30):
        for op in next_ops(w, tick, rng):
            if isinstance(op, AllocRequest):
                live += op.pages
            elif isinstance(op, FreeRequest):
                live -= op.pages
        if tick == 0:
            assert live == 100
        if tick == 10:
            assert live == 400
        if tick == 20:
            assert live == 150


def test_hotness_ordering_on_the_promotion_filter():
    """A hotter stream qualifies pages through the paired-touch filter at a
    strictly higher rate than a colder one with the same footprint."""
    machine = make_machine(local_capacity=128, cxl_capacity=8192, low_watermark=16,
                           high_watermark=32, hint_window=20)
    rates = {}
    for name, hotness in (("fast", 1.0), ("slow", 0.5)):
        mm = MemoryManager(machine, make_containers((name, 0)))
        ids = mm.allocate(name, 2000, tick=0)
        spec = WorkloadSpec(kind="streaming", footprint=2000, hotness=hotness)
        w = build_workload(spec, TICK_SECONDS)
        w.live = 2000  # footprint already placed
        rng = np.random.default_rng(3)
        for tick in range(1, 200):
            for op in next_ops(w, tick, rng):
                if isinstance(op, AccessRequest):
                    mm.record_access_batch(name, ids[op.positions], tick, op.touches)
        rates[name] = mm.by_id[name].counters.hint_faults
    assert rates["fast"] > rates["slow"] > 0
