"""Configuration defaults, overrides, and round-tripping."""

from __future__ import annotations

import pytest

from gardenbot.config import (
    config_from_dict,
    config_to_dict,
    default_config,
    load_config,
)
from gardenbot.coords import Coord2
from gardenbot.errors import UnknownPlot, UnknownSpecies


def test_default_field_layout():
    cfg = default_config()
    assert cfg.field.width_mm == 6000
    assert cfg.field.depth_mm == 3000
    assert cfg.field.z_max_mm == 300
    plots = cfg.plots()
    assert len(plots) == 18
    # row-major: x advances first, then y
    assert cfg.plot("plot-01").origin == Coord2(0, 0)
    assert cfg.plot("plot-06").origin == Coord2(5000, 0)
    assert cfg.plot("plot-07").origin == Coord2(0, 1000)
    assert cfg.plot("plot-18").origin == Coord2(5000, 2000)
    # plots tile the whole field without overlap
    cells = {(p.origin.x_mm, p.origin.y_mm) for p in plots}
    assert len(cells) == 18
    for p in plots:
        assert p.origin.x_mm + p.size_mm <= cfg.field.width_mm
        assert p.origin.y_mm + p.size_mm <= cfg.field.depth_mm


def test_default_species_table():
    cfg = default_config()
    assert set(cfg.species) == {"lettuce", "radish", "cornflower", "marigold", "cumin"}
    radish = cfg.species_spec("radish")
    assert radish.germination_days == 4
    assert radish.spread_radius_mm == 75
    with pytest.raises(UnknownSpecies):
        cfg.species_spec("kudzu")


def test_unknown_plot_raises():
    with pytest.raises(UnknownPlot):
        default_config().plot("plot-99")


def test_config_from_dict_overrides():
    cfg = config_from_dict(
        {
            "field": {"width_mm": 4000, "plot_cols": 4},
            "species": [
                {
                    "species_id": "bok_choy",
                    "display_name": "Bok Choy",
                    "germination_days": 6,
                    "spread_radius_mm": 120,
                    "moisture_threshold": 0.3,
                    "water_volume_ml": 90,
                    "seed_depth_mm": 8,
                },
            ],
            "moisture": {"initial": 0.5},
            "queue_cap": 32,
        }
    )
    assert cfg.field.width_mm == 4000
    assert len(cfg.plots()) == 12
    # new species rows extend the default table
    assert cfg.species_spec("bok_choy").spread_radius_mm == 120
    assert cfg.species_spec("radish").spread_radius_mm == 75
    assert cfg.moisture.initial == 0.5
    assert cfg.queue_cap == 32


def test_config_round_trip():
    cfg = default_config()
    doc = config_to_dict(cfg)
    again = config_from_dict(doc)
    assert config_to_dict(again) == doc
    assert again.field == cfg.field
    assert again.species == cfg.species
    assert again.moisture == cfg.moisture


def test_load_config_yaml(tmp_path):
    path = tmp_path / "garden.yaml"
    path.write_text("queue_cap: 9\nplanner_hour: 7\n")
    cfg = load_config(path)
    assert cfg.queue_cap == 9
    assert cfg.planner_hour == 7
    # everything else stays at defaults
    assert cfg.field.width_mm == 6000
