"""Authoritative garden state: plants, weeds, growth, and the shared timeline.

Plants move through sown → germinated → growing and never shrink; a weeding
pass close enough to a plant removes it (history retained). Germination
requires both age and enough average moisture over the germination window,
sampled once per simulated day at the plant's cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from datetime import datetime
from typing import Any, Callable

from .config import GardenConfig
from .coords import Coord2
from .errors import UnknownPlant
from .gantry import MoistureField

# optional per-sample noise hook, used by stochastic scenarios:
# (day_index, plant_id) -> additive offset
SampleNoise = Callable[[int, str], float]


@dataclass
class Plant:
    id: str
    plot_id: str
    owner: str
    species_id: str
    position: Coord2
    sown_at: datetime
    sown_day: int
    state: str = "sown"               # sown | germinated | growing | removed
    current_radius_mm: float = 0.0
    last_watered_at: datetime | None = None
    germinated_on_day: int | None = None   # survives removal, for rate metrics
    moisture_samples: list[float] = dc_field(default_factory=list)

    @property
    def live(self) -> bool:
        return self.state != "removed"

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "plot_id": self.plot_id,
            "owner": self.owner,
            "species_id": self.species_id,
            "position": list(self.position.as_tuple()),
            "sown_at": self.sown_at.isoformat(),
            "sown_day": self.sown_day,
            "state": self.state,
            "current_radius_mm": self.current_radius_mm,
            "last_watered_at": (
                self.last_watered_at.isoformat() if self.last_watered_at else None
            ),
            "germinated_on_day": self.germinated_on_day,
            "moisture_samples": list(self.moisture_samples),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Plant":
        return cls(
            id=doc["id"],
            plot_id=doc["plot_id"],
            owner=doc["owner"],
            species_id=doc["species_id"],
            position=Coord2(*doc["position"]),
            sown_at=datetime.fromisoformat(doc["sown_at"]),
            sown_day=doc["sown_day"],
            state=doc["state"],
            current_radius_mm=doc["current_radius_mm"],
            last_watered_at=(
                datetime.fromisoformat(doc["last_watered_at"])
                if doc["last_watered_at"]
                else None
            ),
            germinated_on_day=doc.get("germinated_on_day"),
            moisture_samples=list(doc["moisture_samples"]),
        )


@dataclass(frozen=True)
class WeedMark:
    id: str
    plot_id: str
    position: Coord2
    appeared_at: datetime


@dataclass(frozen=True)
class TimelineEvent:
    id: int
    timestamp: datetime
    actor: str                         # user id or "robot"
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "timestamp": self.timestamp.isoformat(),
            "actor": self.actor,
            "kind": self.kind,
            "payload": self.payload,
        }


class Timeline:
    """Append-only global event feed with strictly increasing integer ids."""

    def __init__(self) -> None:
        self.events: list[TimelineEvent] = []
        self._next_id = 1

    def record(self, timestamp: datetime, actor: str, kind: str,
               payload: dict[str, Any]) -> TimelineEvent:
        ev = TimelineEvent(self._next_id, timestamp, actor, kind, dict(payload))
        self._next_id += 1
        self.events.append(ev)
        return ev

    def query(
        self,
        actor: str | None = None,
        plot_id: str | None = None,
        kind: str | None = None,
        since: datetime | None = None,
        until: datetime | None = None,
        after_id: int = 0,
        limit: int = 100,
    ) -> list[TimelineEvent]:
        out = []
        for ev in self.events:
            if ev.id <= after_id:
                continue
            if actor is not None and ev.actor != actor:
                continue
            if plot_id is not None and ev.payload.get("plot_id") != plot_id:
                continue
            if kind is not None and ev.kind != kind:
                continue
            if since is not None and ev.timestamp < since:
                continue
            if until is not None and ev.timestamp > until:
                continue
            out.append(ev)
            if len(out) >= limit:
                break
        return out


class FieldState:
    """Plants, weed marks, and the timeline over one configured field."""

    def __init__(self, cfg: GardenConfig) -> None:
        self.cfg = cfg
        self.plants: dict[str, Plant] = {}
        self.weeds: dict[str, WeedMark] = {}
        self.timeline = Timeline()
        self._plant_seq = 0
        self._weed_seq = 0

    # -- lookups -------------------------------------------------------------

    def plant(self, plant_id: str) -> Plant:
        try:
            return self.plants[plant_id]
        except KeyError:
            raise UnknownPlant(f"unknown plant {plant_id!r}", plant_id=plant_id) from None

    def live_plants(self, plot_id: str | None = None,
                    owner: str | None = None) -> list[Plant]:
        return [
            p for p in self.plants.values()
            if p.live
            and (plot_id is None or p.plot_id == plot_id)
            and (owner is None or p.owner == owner)
        ]

    def live_weeds(self, plot_id: str | None = None) -> list[WeedMark]:
        return [w for w in self.weeds.values() if plot_id is None or w.plot_id == plot_id]

    # -- mutations (called from the engine's single-writer path) ----------------

    def add_plant(self, owner: str, species_id: str, position: Coord2,
                  now: datetime, day: int) -> Plant:
        plot = self.cfg.field.plot_at(position)
        if plot is None:
            raise UnknownPlant(f"position {position.as_tuple()} is outside every plot")
        self._plant_seq += 1
        plant = Plant(
            id=f"plant-{self._plant_seq:04d}",
            plot_id=plot.plot_id,
            owner=owner,
            species_id=species_id,
            position=position,
            sown_at=now,
            sown_day=day,
        )
        self.plants[plant.id] = plant
        return plant

    def add_weed(self, plot_id: str, position: Coord2, now: datetime) -> WeedMark:
        self._weed_seq += 1
        weed = WeedMark(f"weed-{self._weed_seq:04d}", plot_id, position, now)
        self.weeds[weed.id] = weed
        return weed

    def mark_watered(self, plant_id: str, now: datetime) -> None:
        self.plant(plant_id).last_watered_at = now

    def apply_weeding(self, target: Coord2, now: datetime) -> dict[str, list[str]]:
        """Rotary cut at target: clears weed marks within the cut radius and
        removes any plant whose center falls inside it."""
        radius = self.cfg.weed_cut_radius_mm
        cleared = [
            w.id for w in self.weeds.values()
            if w.position.distance_to(target) <= radius
        ]
        for wid in cleared:
            del self.weeds[wid]
        removed = []
        for p in self.plants.values():
            if p.live and p.position.distance_to(target) <= radius:
                p.state = "removed"
                removed.append(p.id)
        return {"weeds_cleared": cleared, "plants_removed": removed}

    # -- growth ----------------------------------------------------------------

    def growth_tick(self, day: int, moisture: MoistureField,
                    noise: SampleNoise | None = None) -> list[dict[str, Any]]:
        """Advance every live plant by one simulated day.

        Each plant takes one moisture sample at its own cell (optionally
        perturbed by the scenario's noise hook). Germination needs age >=
        germination_days and average moisture over the seed's germination
        window (its first germination_days samples) >= the viability
        threshold; after that the radius follows a logistic step scaled by
        a moisture factor in [0.25, 1]. Radii never decrease.
        """
        changes: list[dict[str, Any]] = []
        for plant in self.plants.values():
            if not plant.live:
                continue
            spec = self.cfg.species_spec(plant.species_id)
            sample = moisture.value_at(plant.position)
            if noise is not None:
                sample += noise(day, plant.id)
            sample = min(1.0, max(0.0, sample))
            plant.moisture_samples.append(sample)

            if plant.state == "sown":
                age = day - plant.sown_day
                if age < spec.germination_days:
                    continue
                # the window is the seed's first germination_days days; the
                # verdict is fixed once those samples exist, so a miss is final
                window = plant.moisture_samples[:spec.germination_days]
                avg = sum(window) / len(window)
                if avg >= self.cfg.viability_threshold:
                    plant.state = "germinated"
                    plant.germinated_on_day = day
                    plant.current_radius_mm = (
                        self.cfg.germination_radius_fraction * spec.spread_radius_mm
                    )
                    changes.append({"plant_id": plant.id, "event": "germinated",
                                    "radius_mm": plant.current_radius_mm})
                continue

            # germinated or growing: logistic step, moisture-scaled
            factor = 0.25 + 0.75 * sample
            r = plant.current_radius_mm
            growth = self.cfg.growth_rate_per_day * r * (1 - r / spec.spread_radius_mm)
            growth = max(0.0, growth) * factor
            if growth > 0:
                plant.current_radius_mm = min(r + growth, float(spec.spread_radius_mm))
                if plant.state == "germinated":
                    plant.state = "growing"
                changes.append({"plant_id": plant.id, "event": "grew",
                                "radius_mm": plant.current_radius_mm})
        return changes

    # -- metrics ----------------------------------------------------------------

    def germination_rate(self) -> float:
        """Share of all plants ever sown that germinated (removal later does
        not un-germinate a plant)."""
        sown = len(self.plants)
        if sown == 0:
            return 0.0
        sprouted = sum(
            1 for p in self.plants.values() if p.germinated_on_day is not None
        )
        return sprouted / sown

    # -- persistence --------------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        return {
            "plants": [p.to_dict() for _, p in sorted(self.plants.items())],
            "weeds": [
                {
                    "id": w.id,
                    "plot_id": w.plot_id,
                    "position": list(w.position.as_tuple()),
                    "appeared_at": w.appeared_at.isoformat(),
                }
                for _, w in sorted(self.weeds.items())
            ],
            "plant_seq": self._plant_seq,
            "weed_seq": self._weed_seq,
            "timeline": [ev.to_dict() for ev in self.timeline.events],
        }

    def restore(self, snap: dict[str, Any]) -> None:
        self.plants = {d["id"]: Plant.from_dict(d) for d in snap["plants"]}
        self.weeds = {
            d["id"]: WeedMark(
                d["id"], d["plot_id"], Coord2(*d["position"]),
                datetime.fromisoformat(d["appeared_at"]),
            )
            for d in snap["weeds"]
        }
        self._plant_seq = snap["plant_seq"]
        self._weed_seq = snap["weed_seq"]
        self.timeline = Timeline()
        for d in snap["timeline"]:
            self.timeline.events.append(
                TimelineEvent(
                    d["id"], datetime.fromisoformat(d["timestamp"]),
                    d["actor"], d["kind"], d["payload"],
                )
            )
        if self.timeline.events:
            self.timeline._next_id = self.timeline.events[-1].id + 1
