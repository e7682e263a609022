"""Virtual and wall-scaled clock behavior."""

from __future__ import annotations

from datetime import datetime, timedelta

from gardenbot.clock import DEFAULT_EPOCH, SimClock


def test_virtual_clock_advances_only_on_demand():
    clock = SimClock(DEFAULT_EPOCH)
    t0 = clock.now()
    assert t0 == DEFAULT_EPOCH
    assert clock.now() == t0
    clock.advance(90.0)
    assert clock.now() == t0 + timedelta(seconds=90)


def test_advance_to_past_is_noop():
    clock = SimClock(DEFAULT_EPOCH)
    clock.advance(100.0)
    t = clock.now()
    clock.advance_to(DEFAULT_EPOCH)
    assert clock.now() == t
    clock.advance_to(t + timedelta(seconds=5))
    assert clock.now() == t + timedelta(seconds=5)


def test_day_index_is_one_based():
    clock = SimClock(DEFAULT_EPOCH)
    assert clock.day_index() == 1
    clock.advance(24 * 3600 - 1)
    assert clock.day_index() == 1
    clock.advance(1)
    assert clock.day_index() == 2
    assert clock.day_index(DEFAULT_EPOCH + timedelta(days=6, hours=3)) == 7


def test_wall_scaled_clock_is_monotonic():
    clock = SimClock(DEFAULT_EPOCH, acceleration=1000.0)
    samples = [clock.now() for _ in range(50)]
    assert all(b >= a for a, b in zip(samples, samples[1:]))
    assert samples[-1] > samples[0]


def test_acceleration_change_keeps_time_monotonic():
    clock = SimClock(DEFAULT_EPOCH, acceleration=500.0)
    before = clock.now()
    clock.set_acceleration(2000.0)
    mid = clock.now()
    clock.set_acceleration(0.0)
    frozen = clock.now()
    assert before <= mid <= frozen
    assert clock.now() == frozen


def test_epoch_default():
    assert DEFAULT_EPOCH == datetime(2025, 4, 1)
