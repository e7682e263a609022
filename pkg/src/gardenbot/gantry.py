"""Digital twin of the track-mounted gantry robot.

Covers motion kinematics (constant per-axis velocity, axes moving
simultaneously, duration set by the slowest axis), the tool-mount state
machine over the five bay tools, actuation primitives, and the soil
moisture grid the sensors read from.

All mutation is serialized by the caller (see the engine); reads are safe
at any time. The simulator itself contains no randomness: identical step
sequences from identical states produce identical states and clocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Mapping

import numpy as np

from .clock import SimClock
from .config import GardenConfig
from .coords import Coord2, Coord3
from .errors import (
    NoSeedHeld,
    NoToolMounted,
    NotAtSeedContainer,
    SeedAlreadyHeld,
    ToolAlreadyMounted,
    ToolNotInBay,
    UnknownSpecies,
    UnknownTool,
    WrongToolMounted,
)


class Tool(str, Enum):
    WATERING_NOZZLE = "watering_nozzle"
    SEEDER = "seeder"
    WEEDER = "weeder"
    MOISTURE_PROBE = "moisture_probe"
    EXTRA_SLOT = "extra_slot"


# -- actuation actions ---------------------------------------------------------

@dataclass(frozen=True)
class DispenseWater:
    volume_ml: float


@dataclass(frozen=True)
class VacuumPick:
    species: str


@dataclass(frozen=True)
class VacuumRelease:
    pass


@dataclass(frozen=True)
class RotarySpin:
    duration_s: float


@dataclass(frozen=True)
class CaptureImage:
    pass


@dataclass(frozen=True)
class ReadMoisture:
    pass


Action = DispenseWater | VacuumPick | VacuumRelease | RotarySpin | CaptureImage | ReadMoisture

# capture_image needs no tool: the borescope rides the Z-axis permanently
REQUIRED_TOOL: dict[type, Tool | None] = {
    DispenseWater: Tool.WATERING_NOZZLE,
    VacuumPick: Tool.SEEDER,
    VacuumRelease: Tool.SEEDER,
    RotarySpin: Tool.WEEDER,
    ReadMoisture: Tool.MOISTURE_PROBE,
    CaptureImage: None,
}


@dataclass(frozen=True)
class ActuationResult:
    kind: str
    duration_s: float
    value: float | None = None        # moisture reading, when the action returns one
    detail: dict[str, Any] | None = None


# -- motion --------------------------------------------------------------------

@dataclass(frozen=True)
class MotionPlan:
    origin: Coord3
    target: Coord3
    duration_s: float
    axis_durations: tuple[float, float, float]

    def position_at(self, t: float) -> Coord3:
        """Interpolated position t seconds in; each axis runs at its own speed
        and stops when done, so fast axes arrive before duration_s."""
        if t <= 0:
            return self.origin
        coords = []
        for frm, to, axis_t in zip(
            self.origin.as_tuple(), self.target.as_tuple(), self.axis_durations
        ):
            if axis_t <= 0 or t >= axis_t:
                coords.append(to)
            else:
                coords.append(round(frm + (to - frm) * (t / axis_t)))
        return Coord3(*coords)


def plan_move(frm: Coord3, to: Coord3, speeds: Mapping[str, float]) -> MotionPlan:
    """Duration is the per-axis maximum of |delta| / speed; axes move together."""
    axis_durations = []
    for axis, delta in zip("xyz", (to.x_mm - frm.x_mm, to.y_mm - frm.y_mm, to.z_mm - frm.z_mm)):
        if delta == 0:
            axis_durations.append(0.0)
            continue
        speed = speeds.get(axis, 0.0)
        if speed <= 0:
            raise ValueError(f"no positive speed configured for moving axis {axis}")
        axis_durations.append(abs(delta) / speed)
    return MotionPlan(frm, to, max(axis_durations), tuple(axis_durations))


# -- moisture grid ---------------------------------------------------------------

class MoistureField:
    """Per-cell soil moisture in [0,1] on a uniform grid over the field.

    Watering adds volume × absorption to every cell whose center lies within
    the spray radius; daily weather multiplies by a decay factor (rain days
    decay slower and add a fixed bonus). Values are clamped after every update.
    """

    def __init__(self, cfg: GardenConfig) -> None:
        self.cfg = cfg
        self.cell_mm = cfg.moisture.cell_size_mm
        self.nx = cfg.field.width_mm // self.cell_mm
        self.ny = cfg.field.depth_mm // self.cell_mm
        self.grid = np.full((self.ny, self.nx), cfg.moisture.initial, dtype=np.float64)
        # cell center coordinates, reused by every radius query
        xs = (np.arange(self.nx) + 0.5) * self.cell_mm
        ys = (np.arange(self.ny) + 0.5) * self.cell_mm
        self._cx, self._cy = np.meshgrid(xs, ys)

    def cell_index(self, p: Coord2) -> tuple[int, int]:
        ix = min(p.x_mm // self.cell_mm, self.nx - 1)
        iy = min(p.y_mm // self.cell_mm, self.ny - 1)
        return int(iy), int(ix)

    def value_at(self, p: Coord2) -> float:
        return float(self.grid[self.cell_index(p)])

    def dispense(self, center: Coord2, volume_ml: float) -> float:
        gain = volume_ml * self.cfg.moisture.absorption_per_ml
        mask = (
            (self._cx - center.x_mm) ** 2 + (self._cy - center.y_mm) ** 2
            <= self.cfg.moisture.spray_radius_mm ** 2
        )
        self.grid[mask] = np.clip(self.grid[mask] + gain, 0.0, 1.0)
        return self.value_at(center)

    def apply_daily_weather(self, raining: bool) -> None:
        m = self.cfg.moisture
        self.grid *= m.rain_decay if raining else m.dry_decay
        if raining:
            self.grid += m.rain_bonus
        np.clip(self.grid, 0.0, 1.0, out=self.grid)

    def mean(self) -> float:
        return float(self.grid.mean())

    def snapshot(self) -> list[list[float]]:
        return self.grid.tolist()

    def restore(self, rows: list[list[float]]) -> None:
        arr = np.asarray(rows, dtype=np.float64)
        if arr.shape != self.grid.shape:
            raise ValueError(f"moisture grid shape {arr.shape} != {self.grid.shape}")
        self.grid = arr


# -- the gantry itself -----------------------------------------------------------

EmitFn = Callable[[str, dict[str, Any]], None]


class GantrySim:
    """Tool-mount state machine plus executable motion and actuation.

    Invariants maintained: at most one tool mounted; bay contents plus the
    mounted tool always equal the configured tool set; position stays within
    axis bounds; the sim clock only moves forward.
    """

    def __init__(self, cfg: GardenConfig, clock: SimClock, emit: EmitFn | None = None) -> None:
        self.cfg = cfg
        self.clock = clock
        self.emit = emit or (lambda kind, payload: None)
        self.position = cfg.field.home_position
        self.mounted_tool: Tool | None = None
        self.bay: set[Tool] = {Tool(t) for t in cfg.field.tool_bay_slots}
        self.seed_held: str | None = None
        self.busy = False
        self.moisture = MoistureField(cfg)

    # -- observation -----------------------------------------------------------

    def state(self) -> dict[str, Any]:
        return {
            "position": list(self.position.as_tuple()),
            "mounted_tool": self.mounted_tool.value if self.mounted_tool else None,
            "busy": self.busy,
            "seed_held": self.seed_held,
            "bay": sorted(t.value for t in self.bay),
            "sim_time": self.clock.now().isoformat(),
        }

    # -- motion ----------------------------------------------------------------

    def plan_move_to(self, to: Coord3) -> MotionPlan:
        self.cfg.field.check_bounds(self.position)
        self.cfg.field.check_bounds(to)
        return plan_move(self.position, to, self.cfg.field.axis_speed_mm_per_s)

    def move_to(self, to: Coord3) -> MotionPlan:
        plan = self.plan_move_to(to)
        self.busy = True
        try:
            start = self.clock.now()
            waypoints = []
            interval = self.cfg.stream_motion_interval_s
            t = interval
            while t < plan.duration_s:
                waypoints.append(
                    {"t_s": t, "position": list(plan.position_at(t).as_tuple())}
                )
                t += interval
            self.clock.advance(plan.duration_s)
            self.position = to
            self.emit(
                "gantry.move",
                {
                    "from": list(plan.origin.as_tuple()),
                    "to": list(to.as_tuple()),
                    "duration_s": plan.duration_s,
                    "started_at": start.isoformat(),
                    "waypoints": waypoints,
                },
            )
        finally:
            self.busy = False
        return plan

    def wait(self, duration_s: float) -> None:
        if duration_s < 0:
            raise ValueError("wait duration must be nonnegative")
        self.busy = True
        try:
            self.clock.advance(duration_s)
        finally:
            self.busy = False

    # -- tool mount state machine ------------------------------------------------

    def _tool_slot(self, tool: Tool) -> Coord3:
        return self.cfg.field.tool_bay_slots[tool.value]

    def _check_known(self, tool_id: str) -> Tool:
        try:
            tool = Tool(tool_id)
        except ValueError:
            raise UnknownTool(f"unknown tool {tool_id!r}", tool_id=tool_id) from None
        if tool.value not in self.cfg.field.tool_bay_slots:
            raise UnknownTool(f"tool {tool_id!r} has no bay slot", tool_id=tool_id)
        return tool

    def mount_tool(self, tool_id: str) -> dict[str, Any]:
        tool = self._check_known(tool_id)
        if tool not in self.bay:
            raise ToolNotInBay(f"tool {tool_id!r} is not in the bay", tool_id=tool_id)
        if self.mounted_tool is not None:
            raise ToolAlreadyMounted(
                f"cannot mount {tool_id!r}: {self.mounted_tool.value!r} is mounted",
                mounted=self.mounted_tool.value,
            )
        slot = self._tool_slot(tool)
        self.move_to(Coord3(slot.x_mm, slot.y_mm, 0))
        self.move_to(slot)                      # lower to the magnetic coupling
        self.busy = True
        try:
            self.clock.advance(self.cfg.engage_s)
        finally:
            self.busy = False
        self.bay.discard(tool)
        self.mounted_tool = tool
        self.move_to(Coord3(slot.x_mm, slot.y_mm, 0))
        self.emit("gantry.mount", {"tool": tool.value})
        return self.state()

    def unmount_tool(self) -> dict[str, Any]:
        if self.mounted_tool is None:
            raise NoToolMounted("no tool mounted")
        tool = self.mounted_tool
        slot = self._tool_slot(tool)
        self.move_to(Coord3(slot.x_mm, slot.y_mm, 0))
        self.move_to(slot)
        self.busy = True
        try:
            self.clock.advance(self.cfg.engage_s)
        finally:
            self.busy = False
        self.mounted_tool = None
        self.bay.add(tool)
        self.move_to(Coord3(slot.x_mm, slot.y_mm, 0))
        self.emit("gantry.unmount", {"tool": tool.value})
        return self.state()

    # -- actuation ---------------------------------------------------------------

    def actuate(self, action: Action) -> ActuationResult:
        required = REQUIRED_TOOL[type(action)]
        if required is not None and self.mounted_tool != required:
            raise WrongToolMounted(
                f"{type(action).__name__} needs {required.value!r}, "
                f"mounted: {self.mounted_tool.value if self.mounted_tool else 'none'}",
                required=required.value,
                mounted=self.mounted_tool.value if self.mounted_tool else None,
            )
        self.busy = True
        try:
            result = self._do_actuate(action)
        finally:
            self.busy = False
        self.emit(
            "gantry.actuation",
            {
                "kind": result.kind,
                "position": list(self.position.as_tuple()),
                "value": result.value,
                **(result.detail or {}),
            },
        )
        return result

    def _do_actuate(self, action: Action) -> ActuationResult:
        cfg = self.cfg
        here = self.position.xy()
        if isinstance(action, DispenseWater):
            if action.volume_ml < 0:
                raise ValueError("volume must be nonnegative")
            self.clock.advance(cfg.dispense_s)
            after = self.moisture.dispense(here, action.volume_ml)
            return ActuationResult(
                "dispense_water", cfg.dispense_s, value=after,
                detail={"volume_ml": action.volume_ml},
            )
        if isinstance(action, VacuumPick):
            if action.species not in cfg.field.seed_containers:
                raise UnknownSpecies(
                    f"no seed container for {action.species!r}", species_id=action.species
                )
            if self.seed_held is not None:
                raise SeedAlreadyHeld(f"already holding a {self.seed_held!r} seed")
            container = cfg.field.seed_containers[action.species]
            if self.position != container:
                raise NotAtSeedContainer(
                    f"vacuum_pick({action.species!r}) at {self.position.as_tuple()}, "
                    f"container is at {container.as_tuple()}",
                    expected=container.as_tuple(),
                    actual=self.position.as_tuple(),
                )
            self.clock.advance(cfg.vacuum_pick_s)
            self.seed_held = action.species
            return ActuationResult(
                "vacuum_pick", cfg.vacuum_pick_s, detail={"species": action.species}
            )
        if isinstance(action, VacuumRelease):
            if self.seed_held is None:
                raise NoSeedHeld("vacuum_release with no seed held")
            species = self.seed_held
            self.clock.advance(cfg.vacuum_release_s)
            self.seed_held = None
            return ActuationResult(
                "vacuum_release", cfg.vacuum_release_s, detail={"species": species}
            )
        if isinstance(action, RotarySpin):
            if action.duration_s < 0:
                raise ValueError("spin duration must be nonnegative")
            self.clock.advance(action.duration_s)
            return ActuationResult("rotary_spin", action.duration_s)
        if isinstance(action, CaptureImage):
            self.clock.advance(cfg.capture_s)
            return ActuationResult(
                "capture_image", cfg.capture_s,
                value=self.moisture.value_at(here),
                detail={"sim_time": self.clock.now().isoformat()},
            )
        if isinstance(action, ReadMoisture):
            self.clock.advance(cfg.read_moisture_s)
            return ActuationResult(
                "read_moisture", cfg.read_moisture_s, value=self.moisture.value_at(here)
            )
        raise TypeError(f"unknown action {action!r}")

    # -- persistence -----------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        return {
            "position": list(self.position.as_tuple()),
            "mounted_tool": self.mounted_tool.value if self.mounted_tool else None,
            "bay": sorted(t.value for t in self.bay),
            "seed_held": self.seed_held,
            "moisture": self.moisture.snapshot(),
        }

    def restore(self, snap: dict[str, Any]) -> None:
        self.position = Coord3(*snap["position"])
        self.mounted_tool = Tool(snap["mounted_tool"]) if snap["mounted_tool"] else None
        self.bay = {Tool(t) for t in snap["bay"]}
        self.seed_held = snap["seed_held"]
        self.moisture.restore(snap["moisture"])
