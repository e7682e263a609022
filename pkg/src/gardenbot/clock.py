"""Simulated clock.

Two modes:

* virtual (default) — time advances only through explicit ``advance`` /
  ``advance_to`` calls. Scenario runs and tests use this; a run is a pure
  function of its inputs.
* wall-scaled — ``now`` tracks wall time multiplied by an acceleration
  factor. The live API service uses this so concurrent submissions get
  strictly increasing timestamps.

Simulated time never decreases; changing the acceleration factor re-bases
the mapping so already-observed times are preserved.
"""

from __future__ import annotations

import threading
import time as _time
from datetime import datetime, timedelta

DEFAULT_EPOCH = datetime(2025, 4, 1, 0, 0, 0)


class SimClock:
    def __init__(self, epoch: datetime = DEFAULT_EPOCH, acceleration: float = 0.0):
        """acceleration 0 = virtual mode; > 0 = sim seconds per wall second."""
        self._lock = threading.Lock()
        self._epoch = epoch
        self._current = epoch
        self._acceleration = float(acceleration)
        self._wall_base = _time.monotonic()

    @property
    def epoch(self) -> datetime:
        return self._epoch

    @property
    def acceleration(self) -> float:
        return self._acceleration

    def now(self) -> datetime:
        with self._lock:
            return self._now_locked()

    def _now_locked(self) -> datetime:
        if self._acceleration > 0:
            wall_elapsed = _time.monotonic() - self._wall_base
            candidate = self._current + timedelta(seconds=wall_elapsed * self._acceleration)
            # observing time commits it: later reads can only move forward
            self._current = candidate
            self._wall_base = _time.monotonic()
        return self._current

    def advance(self, seconds: float) -> datetime:
        if seconds < 0:
            raise ValueError(f"cannot advance clock by {seconds} s")
        with self._lock:
            now = self._now_locked()
            self._current = now + timedelta(seconds=seconds)
            return self._current

    def advance_to(self, timestamp: datetime) -> datetime:
        """Jump forward to `timestamp`; a timestamp in the past is a no-op."""
        with self._lock:
            now = self._now_locked()
            if timestamp > now:
                self._current = timestamp
            return self._current

    def set_acceleration(self, factor: float) -> None:
        """Change pacing without reordering anything already observed."""
        if factor < 0:
            raise ValueError("acceleration must be >= 0")
        with self._lock:
            self._now_locked()  # commit current time under the old factor
            self._acceleration = float(factor)
            self._wall_base = _time.monotonic()

    def day_index(self, t: datetime | None = None) -> int:
        """1-based simulated day number relative to the epoch."""
        t = t if t is not None else self.now()
        return (t - self._epoch).days + 1
