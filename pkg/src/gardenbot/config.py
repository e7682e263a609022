"""Configuration: field geometry, species catalog, simulation constants.

Everything tunable lives here and can be overridden from a YAML file (see
``load_config`` and the schema documented in the README). The default field
is a 6000 x 3000 mm bed tiled by 3 rows x 6 columns of 1000 mm plots, with
the tool bay and seed containers along the x = 0 edge near the home position.

Species rows carry horticultural defaults only; none of them are validated
against real hardware.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

import yaml

from .coords import Coord2, Coord3
from .errors import OutOfBounds, UnknownPlot, UnknownSpecies

TOOLS = ("watering_nozzle", "seeder", "weeder", "moisture_probe", "extra_slot")


@dataclass(frozen=True)
class SpeciesSpec:
    species_id: str
    display_name: str
    germination_days: int
    spread_radius_mm: int
    moisture_threshold: float
    water_volume_ml: float
    seed_depth_mm: int


@dataclass(frozen=True)
class Plot:
    plot_id: str
    origin: Coord2            # lower-left corner, field coordinates
    size_mm: int

    def contains(self, p: Coord2) -> bool:
        return (
            self.origin.x_mm <= p.x_mm < self.origin.x_mm + self.size_mm
            and self.origin.y_mm <= p.y_mm < self.origin.y_mm + self.size_mm
        )


@dataclass(frozen=True)
class FieldConfig:
    width_mm: int = 6000
    depth_mm: int = 3000
    z_max_mm: int = 300
    plot_rows: int = 3
    plot_cols: int = 6
    plot_size_mm: int = 1000
    home_position: Coord3 = Coord3(0, 0, 0)
    tool_bay_slots: dict[str, Coord3] = field(default_factory=dict)
    seed_containers: dict[str, Coord3] = field(default_factory=dict)
    axis_speed_mm_per_s: dict[str, float] = field(
        default_factory=lambda: {"x": 80.0, "y": 80.0, "z": 25.0}
    )

    def __post_init__(self) -> None:
        if self.plot_rows * self.plot_size_mm > self.depth_mm:
            raise ValueError("plot rows do not fit inside field depth")
        if self.plot_cols * self.plot_size_mm > self.width_mm:
            raise ValueError("plot columns do not fit inside field width")
        for name, speed in self.axis_speed_mm_per_s.items():
            if speed <= 0:
                raise ValueError(f"axis speed {name} must be positive")
        for label, coord in self.named_coords():
            if not self.in_bounds(coord):
                raise ValueError(f"{label} at {coord.as_tuple()} is outside axis bounds")

    def named_coords(self) -> Iterable[tuple[str, Coord3]]:
        yield "home_position", self.home_position
        for tool, c in self.tool_bay_slots.items():
            yield f"tool bay slot {tool}", c
        for sp, c in self.seed_containers.items():
            yield f"seed container {sp}", c

    def in_bounds(self, c: Coord3) -> bool:
        return (
            0 <= c.x_mm <= self.width_mm
            and 0 <= c.y_mm <= self.depth_mm
            and 0 <= c.z_mm <= self.z_max_mm
        )

    def check_bounds(self, c: Coord3) -> None:
        if not self.in_bounds(c):
            raise OutOfBounds(
                f"coordinate {c.as_tuple()} outside field bounds",
                coordinate=c.as_tuple(),
            )

    def plots(self) -> list[Plot]:
        """Row-major plot grid: plot-01 at the origin corner, filling x first."""
        out = []
        n = 0
        for row in range(self.plot_rows):
            for col in range(self.plot_cols):
                n += 1
                out.append(
                    Plot(
                        plot_id=f"plot-{n:02d}",
                        origin=Coord2(col * self.plot_size_mm, row * self.plot_size_mm),
                        size_mm=self.plot_size_mm,
                    )
                )
        return out

    def plot_at(self, p: Coord2) -> Plot | None:
        for plot in self.plots():
            if plot.contains(p):
                return plot
        return None


@dataclass(frozen=True)
class MoistureConfig:
    cell_size_mm: int = 100
    initial: float = 0.35
    absorption_per_ml: float = 0.002       # moisture gained per ml within the spray radius
    spray_radius_mm: float = 150.0
    dry_decay: float = 0.70                # per-day multiplier, no rain
    rain_decay: float = 0.95               # per-day multiplier on rain days
    rain_bonus: float = 0.30               # added once per rain day


@dataclass(frozen=True)
class GardenConfig:
    """Root configuration object shared by all modules."""

    field: FieldConfig
    species: dict[str, SpeciesSpec]
    moisture: MoistureConfig = MoistureConfig()

    # vertical targets (mm, downward); watering height is cosmetic by design
    soil_z_mm: int = 250
    watering_z_mm: int = 150
    scan_z_mm: int = 100
    weed_cut_radius_mm: float = 60.0

    # fixed actuation durations (seconds of simulated time)
    engage_s: float = 4.0                  # tool mount/unmount engage step
    dispense_s: float = 3.0
    vacuum_pick_s: float = 2.0
    vacuum_release_s: float = 1.0
    rotary_spin_s: float = 3.0
    capture_s: float = 1.0
    read_moisture_s: float = 1.0

    scan_grid_mm: int = 300

    # policy
    overwater_threshold: float = 0.9
    rewater_window_s: float = 7200.0       # same plant watered again within 2 h
    rain_suspend_threshold: float = 0.2    # skip planner watering when raining and moisture >= this
    water_all_debounce_s: float = 60.0
    reject_interactive_care_in_automated: bool = True

    # growth model
    growth_rate_per_day: float = 0.25
    germination_radius_fraction: float = 0.10
    viability_threshold: float = 0.15      # min average moisture over the germination window

    # queueing / streaming
    queue_cap: int = 256
    planner_hour: int = 6
    stream_motion_interval_s: float = 5.0
    stream_buffer: int = 50000
    session_ttl_s: float = 14400.0
    login_rate_limit: int = 5              # failed attempts per window
    login_rate_window_s: float = 60.0
    pbkdf2_iterations: int = 50000
    checkpoint_every_days: int = 1
    render_px_per_mm: float = 0.1

    def species_spec(self, species_id: str) -> SpeciesSpec:
        try:
            return self.species[species_id]
        except KeyError:
            raise UnknownSpecies(f"unknown species {species_id!r}", species_id=species_id) from None

    def plots(self) -> list[Plot]:
        return self.field.plots()

    def plot(self, plot_id: str) -> Plot:
        for p in self.field.plots():
            if p.plot_id == plot_id:
                return p
        raise UnknownPlot(f"unknown plot {plot_id!r}", plot_id=plot_id)


DEFAULT_SPECIES = {
    "lettuce": SpeciesSpec("lettuce", "Lettuce", 8, 150, 0.35, 150.0, 10),
    "radish": SpeciesSpec("radish", "Radish", 4, 75, 0.30, 100.0, 10),
    "cornflower": SpeciesSpec("cornflower", "Cornflower", 10, 100, 0.25, 100.0, 10),
    "marigold": SpeciesSpec("marigold", "Marigold", 7, 125, 0.25, 120.0, 15),
    "cumin": SpeciesSpec("cumin", "Cumin", 12, 80, 0.30, 80.0, 10),
}


def default_field_config() -> FieldConfig:
    bay = {tool: Coord3(0, 200 + 200 * i, 250) for i, tool in enumerate(TOOLS)}
    containers = {
        sp: Coord3(0, 1400 + 200 * i, 250) for i, sp in enumerate(sorted(DEFAULT_SPECIES))
    }
    return FieldConfig(tool_bay_slots=bay, seed_containers=containers)


def default_config() -> GardenConfig:
    return GardenConfig(field=default_field_config(), species=dict(DEFAULT_SPECIES))


# -- YAML loading -------------------------------------------------------------

def _coord3(v: Any) -> Coord3:
    x, y, z = v
    return Coord3(int(x), int(y), int(z))


def config_from_dict(doc: dict[str, Any]) -> GardenConfig:
    base = default_config()
    fdoc = doc.get("field", {})
    fld = base.field
    if fdoc:
        kwargs: dict[str, Any] = {}
        for key in ("width_mm", "depth_mm", "z_max_mm", "plot_rows", "plot_cols", "plot_size_mm"):
            if key in fdoc:
                kwargs[key] = int(fdoc[key])
        if "home_position" in fdoc:
            kwargs["home_position"] = _coord3(fdoc["home_position"])
        if "tool_bay_slots" in fdoc:
            kwargs["tool_bay_slots"] = {t: _coord3(c) for t, c in fdoc["tool_bay_slots"].items()}
        if "seed_containers" in fdoc:
            kwargs["seed_containers"] = {s: _coord3(c) for s, c in fdoc["seed_containers"].items()}
        if "axis_speed_mm_per_s" in fdoc:
            kwargs["axis_speed_mm_per_s"] = {
                a: float(v) for a, v in fdoc["axis_speed_mm_per_s"].items()
            }
        fld = replace(fld, **kwargs)

    species = dict(base.species)
    for row in doc.get("species", []):
        spec = SpeciesSpec(
            species_id=row["species_id"],
            display_name=row.get("display_name", row["species_id"].title()),
            germination_days=int(row["germination_days"]),
            spread_radius_mm=int(row["spread_radius_mm"]),
            moisture_threshold=float(row["moisture_threshold"]),
            water_volume_ml=float(row["water_volume_ml"]),
            seed_depth_mm=int(row["seed_depth_mm"]),
        )
        species[spec.species_id] = spec

    moisture = base.moisture
    if "moisture" in doc:
        moisture = replace(moisture, **{
            k: (int(v) if k == "cell_size_mm" else float(v))
            for k, v in doc["moisture"].items()
        })

    scalar_keys = {
        f.name for f in GardenConfig.__dataclass_fields__.values()
    } - {"field", "species", "moisture"}
    overrides = {k: v for k, v in doc.items() if k in scalar_keys}
    return replace(base, field=fld, species=species, moisture=moisture, **overrides)


def load_config(path: str | Path) -> GardenConfig:
    doc = yaml.safe_load(Path(path).read_text()) or {}
    return config_from_dict(doc)


def config_to_dict(cfg: GardenConfig) -> dict[str, Any]:
    """Full round-trippable dump; used by the journal header."""
    return {
        "field": {
            "width_mm": cfg.field.width_mm,
            "depth_mm": cfg.field.depth_mm,
            "z_max_mm": cfg.field.z_max_mm,
            "plot_rows": cfg.field.plot_rows,
            "plot_cols": cfg.field.plot_cols,
            "plot_size_mm": cfg.field.plot_size_mm,
            "home_position": list(cfg.field.home_position.as_tuple()),
            "tool_bay_slots": {t: list(c.as_tuple()) for t, c in cfg.field.tool_bay_slots.items()},
            "seed_containers": {s: list(c.as_tuple()) for s, c in cfg.field.seed_containers.items()},
            "axis_speed_mm_per_s": dict(cfg.field.axis_speed_mm_per_s),
        },
        "species": [
            {
                "species_id": s.species_id,
                "display_name": s.display_name,
                "germination_days": s.germination_days,
                "spread_radius_mm": s.spread_radius_mm,
                "moisture_threshold": s.moisture_threshold,
                "water_volume_ml": s.water_volume_ml,
                "seed_depth_mm": s.seed_depth_mm,
            }
            for _, s in sorted(cfg.species.items())
        ],
        "moisture": {
            "cell_size_mm": cfg.moisture.cell_size_mm,
            "initial": cfg.moisture.initial,
            "absorption_per_ml": cfg.moisture.absorption_per_ml,
            "spray_radius_mm": cfg.moisture.spray_radius_mm,
            "dry_decay": cfg.moisture.dry_decay,
            "rain_decay": cfg.moisture.rain_decay,
            "rain_bonus": cfg.moisture.rain_bonus,
        },
        **{
            name: getattr(cfg, name)
            for name in sorted(GardenConfig.__dataclass_fields__)
            if name not in ("field", "species", "moisture")
        },
    }
