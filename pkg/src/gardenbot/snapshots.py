"""Daily field snapshots, rendering, and time-lapse assembly.

One record is captured per simulated day; it carries the structured layer
(plant positions, radii, states, weed marks) plus the moisture grid at
capture time. Rasters are rendered from the record on demand: the top-down
view covers the whole field, and the three fixed camera perspectives are
deterministic crops of it (left, center, right thirds).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any

from PIL import Image, ImageDraw

from .config import GardenConfig
from .errors import NoFrames
from .field import FieldState
from .gantry import MoistureField

PERSPECTIVES = ("topdown", "cameraA", "cameraB", "cameraC")

# soil shading endpoints: dry sand -> saturated dark loam
_DRY = (198, 166, 118)
_WET = (72, 52, 34)
_PLANT_FILL = {"germinated": (129, 199, 132), "growing": (56, 142, 60)}
_SOWN_DOT = (93, 64, 55)
_WEED = (229, 57, 53)
_GRID = (120, 100, 80)


@dataclass(frozen=True)
class FrameRecord:
    day_index: int
    captured_at: datetime
    plants: tuple[dict[str, Any], ...]
    weeds: tuple[dict[str, Any], ...]
    moisture: tuple[tuple[float, ...], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "day_index": self.day_index,
            "captured_at": self.captured_at.isoformat(),
            "plants": [dict(p) for p in self.plants],
            "weeds": [dict(w) for w in self.weeds],
            "moisture": [list(row) for row in self.moisture],
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "FrameRecord":
        return cls(
            day_index=doc["day_index"],
            captured_at=datetime.fromisoformat(doc["captured_at"]),
            plants=tuple(doc["plants"]),
            weeds=tuple(doc["weeds"]),
            moisture=tuple(tuple(row) for row in doc["moisture"]),
        )


def capture_record(day: int, now: datetime, field: FieldState,
                   moisture: MoistureField) -> FrameRecord:
    plants = tuple(
        {
            "id": p.id,
            "plot_id": p.plot_id,
            "owner": p.owner,
            "species_id": p.species_id,
            "position": list(p.position.as_tuple()),
            "radius_mm": p.current_radius_mm,
            "state": p.state,
        }
        for _, p in sorted(field.plants.items())
    )
    weeds = tuple(
        {"id": w.id, "plot_id": w.plot_id, "position": list(w.position.as_tuple())}
        for _, w in sorted(field.weeds.items())
    )
    grid = tuple(tuple(float(v) for v in row) for row in moisture.grid)
    return FrameRecord(day, now, plants, weeds, grid)


class TimelapseStore:
    """Ordered day-indexed frame records with lazy raster rendering."""

    def __init__(self, cfg: GardenConfig) -> None:
        self.cfg = cfg
        self.records: list[FrameRecord] = []
        self._raster_cache: dict[tuple[int, str, str | None], bytes] = {}

    def capture(self, day: int, now: datetime, field: FieldState,
                moisture: MoistureField) -> FrameRecord:
        if self.records and day <= self.records[-1].day_index:
            raise ValueError(
                f"frame for day {day} after day {self.records[-1].day_index}"
            )
        rec = capture_record(day, now, field, moisture)
        self.records.append(rec)
        return rec

    def frames(self, plot_id: str | None = None) -> list[FrameRecord]:
        if plot_id is not None:
            self.cfg.plot(plot_id)        # raises UnknownPlot for bad ids
        if not self.records:
            raise NoFrames("no daily frames captured yet")
        return list(self.records)

    # -- rendering ---------------------------------------------------------------

    def render(self, record: FrameRecord, perspective: str = "topdown",
               plot_id: str | None = None) -> bytes:
        key = (record.day_index, perspective, plot_id)
        cached = self._raster_cache.get(key)
        if cached is not None:
            return cached
        png = render_frame(self.cfg, record, perspective, plot_id)
        self._raster_cache[key] = png
        return png

    # -- persistence -----------------------------------------------------------------

    def snapshot_state(self) -> list[dict[str, Any]]:
        return [r.to_dict() for r in self.records]

    def restore_state(self, docs: list[dict[str, Any]]) -> None:
        self.records = [FrameRecord.from_dict(d) for d in docs]
        self._raster_cache.clear()


def render_frame(cfg: GardenConfig, record: FrameRecord,
                 perspective: str = "topdown", plot_id: str | None = None) -> bytes:
    """Rasterize one record: moisture-shaded soil cells, plot grid, plant
    growth circles, weed marks. Field origin renders at the bottom-left."""
    if perspective not in PERSPECTIVES:
        raise ValueError(f"unknown perspective {perspective!r}")
    scale = cfg.render_px_per_mm
    w_px = int(cfg.field.width_mm * scale)
    h_px = int(cfg.field.depth_mm * scale)
    img = Image.new("RGB", (w_px, h_px), _DRY)
    draw = ImageDraw.Draw(img)

    def to_px(x_mm: float, y_mm: float) -> tuple[float, float]:
        return x_mm * scale, (cfg.field.depth_mm - y_mm) * scale

    cell = cfg.moisture.cell_size_mm
    for iy, row in enumerate(record.moisture):
        for ix, m in enumerate(row):
            c = tuple(
                int(d + (w - d) * m) for d, w in zip(_DRY, _WET)
            )
            x0, y1 = to_px(ix * cell, iy * cell)
            x1, y0 = to_px((ix + 1) * cell, (iy + 1) * cell)
            draw.rectangle([x0, y0, x1, y1], fill=c)

    for plot in cfg.field.plots():
        x0, y1 = to_px(plot.origin.x_mm, plot.origin.y_mm)
        x1, y0 = to_px(plot.origin.x_mm + plot.size_mm, plot.origin.y_mm + plot.size_mm)
        draw.rectangle([x0, y0, x1 - 1, y1 - 1], outline=_GRID)

    for weed in record.weeds:
        px, py = to_px(*weed["position"])
        draw.line([px - 3, py - 3, px + 3, py + 3], fill=_WEED, width=1)
        draw.line([px - 3, py + 3, px + 3, py - 3], fill=_WEED, width=1)

    for plant in record.plants:
        if plant["state"] == "removed":
            continue
        px, py = to_px(*plant["position"])
        if plant["state"] == "sown":
            draw.ellipse([px - 2, py - 2, px + 2, py + 2], fill=_SOWN_DOT)
            continue
        r = max(2.0, plant["radius_mm"] * scale)
        fill = _PLANT_FILL.get(plant["state"], _PLANT_FILL["growing"])
        draw.ellipse([px - r, py - r, px + r, py + r], fill=fill, outline=(27, 94, 32))

    if plot_id is not None:
        plot = cfg.plot(plot_id)
        x0, y1 = to_px(plot.origin.x_mm, plot.origin.y_mm)
        x1, y0 = to_px(plot.origin.x_mm + plot.size_mm, plot.origin.y_mm + plot.size_mm)
        img = img.crop((int(x0), int(y0), int(x1), int(y1)))
    elif perspective != "topdown":
        # the three fixed cameras each cover one third of the field
        third = w_px // 3
        index = {"cameraA": 0, "cameraB": 1, "cameraC": 2}[perspective]
        img = img.crop((index * third, 0, (index + 1) * third, h_px))

    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def export_timelapse(store: TimelapseStore, out_dir: str | Path,
                     plot_id: str | None = None,
                     perspective: str = "topdown") -> dict[str, Any]:
    """Write day-ordered PNGs plus a manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in store.frames(plot_id):
        name = f"day_{rec.day_index:03d}_{perspective}.png"
        (out / name).write_bytes(store.render(rec, perspective, plot_id))
        entries.append({
            "day_index": rec.day_index,
            "captured_at": rec.captured_at.isoformat(),
            "file": name,
            "perspective": perspective,
            "plot_id": plot_id,
            "plants": len([p for p in rec.plants if p["state"] != "removed"]),
        })
    manifest = {"frames": entries, "count": len(entries)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest
