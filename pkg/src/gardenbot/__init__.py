"""Orchestration stack for a gantry-based gardening robot.

The package simulates the robot and its field (digital twin), compiles
high-level gardening tasks into primitive motion steps, schedules them
under three interaction modes, grows plants on a daily tick, journals
every event for replay, and exposes the whole thing over an HTTP API
plus a scripted scenario runner.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .clock import SimClock
from .config import GardenConfig, default_config, load_config
from .coords import Coord2, Coord3
from .errors import GardenError

__all__ = [
    "Coord2",
    "Coord3",
    "GardenConfig",
    "GardenError",
    "SimClock",
    "default_config",
    "load_config",
    "__version__",
]
