"""Weather input: trace-file replay for deterministic runs, plus a stub
client that stands in for a live provider (including its outages)."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Protocol

from .errors import WeatherUnavailable


@dataclass(frozen=True)
class WeatherSample:
    timestamp: datetime
    raining: bool
    rainfall_mm: float
    temperature_c: float

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp.isoformat(),
            "raining": self.raining,
            "rainfall_mm": self.rainfall_mm,
            "temperature_c": self.temperature_c,
        }


class WeatherProvider(Protocol):
    def current(self, now: datetime) -> WeatherSample: ...

    def forecast(self, now: datetime, horizon_h: float = 48.0) -> list[WeatherSample]: ...


_TRUTHY = {"1", "true", "yes", "rain"}
_FALSY = {"0", "false", "no", "dry"}


def parse_trace_line(line: str, lineno: int = 0) -> WeatherSample:
    """One record per line: `<ISO-8601> <raining> <rainfall_mm> <temperature_c>`."""
    parts = line.split()
    if len(parts) != 4:
        raise ValueError(f"trace line {lineno}: expected 4 fields, got {len(parts)}")
    ts = datetime.fromisoformat(parts[0])
    flag = parts[1].lower()
    if flag in _TRUTHY:
        raining = True
    elif flag in _FALSY:
        raining = False
    else:
        raise ValueError(f"trace line {lineno}: bad raining flag {parts[1]!r}")
    rainfall = float(parts[2])
    if rainfall < 0:
        raise ValueError(f"trace line {lineno}: negative rainfall")
    return WeatherSample(ts, raining, rainfall, float(parts[3]))


class TraceProvider:
    """Replays a recorded weather trace; `current` returns the latest sample
    at or before the queried time."""

    def __init__(self, samples: Iterable[WeatherSample]) -> None:
        self.samples = sorted(samples, key=lambda s: s.timestamp)
        for a, b in zip(self.samples, self.samples[1:]):
            if b.timestamp <= a.timestamp:
                raise ValueError(f"trace not strictly increasing at {b.timestamp}")
        if not self.samples:
            raise ValueError("empty weather trace")

    @classmethod
    def from_path(cls, path: str | Path) -> "TraceProvider":
        samples = []
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            samples.append(parse_trace_line(line, lineno))
        return cls(samples)

    def current(self, now: datetime) -> WeatherSample:
        best = None
        for s in self.samples:
            if s.timestamp <= now:
                best = s
            else:
                break
        if best is None:
            raise WeatherUnavailable(
                f"trace starts at {self.samples[0].timestamp.isoformat()}, "
                f"queried {now.isoformat()}"
            )
        return best

    def forecast(self, now: datetime, horizon_h: float = 48.0) -> list[WeatherSample]:
        end = now + timedelta(hours=horizon_h)
        return [s for s in self.samples if now < s.timestamp <= end]


class StubProvider:
    """Synthetic provider for demos: a fixed weekly pattern of rain days,
    with optional simulated outages on given day indices."""

    def __init__(self, epoch: datetime, rain_days: set[int] | None = None,
                 outage_days: set[int] | None = None,
                 temperature_c: float = 16.0) -> None:
        self.epoch = epoch
        self.rain_days = rain_days or set()
        self.outage_days = outage_days or set()
        self.temperature_c = temperature_c

    def current(self, now: datetime) -> WeatherSample:
        day = (now - self.epoch).days + 1
        if day in self.outage_days:
            raise WeatherUnavailable(f"provider outage on day {day}")
        raining = day in self.rain_days
        return WeatherSample(
            timestamp=now,
            raining=raining,
            rainfall_mm=4.0 if raining else 0.0,
            temperature_c=self.temperature_c,
        )

    def forecast(self, now: datetime, horizon_h: float = 48.0) -> list[WeatherSample]:
        out = []
        day = (now - self.epoch).days + 1
        for offset in range(1, int(horizon_h // 24) + 1):
            future_day = day + offset
            raining = future_day in self.rain_days
            out.append(WeatherSample(
                timestamp=self.epoch + timedelta(days=future_day - 1, hours=12),
                raining=raining,
                rainfall_mm=4.0 if raining else 0.0,
                temperature_c=self.temperature_c,
            ))
        return out
