"""Compile high-level tasks into well-formed primitive step sequences.

Compilation is pure: the same (task, field, gantry position) always yields
the same steps. Every sequence mounts at most one tool, actuates only with
that tool, and returns it before finishing; scans mount nothing because the
camera is fixed to the Z-axis.
"""

from __future__ import annotations

from .config import GardenConfig
from .coords import Coord2, Coord3
from .errors import EmptyTargetList, MalformedSequence, UnknownSpecies
from .field import FieldState, Plant
from .gantry import (
    REQUIRED_TOOL,
    CaptureImage,
    DispenseWater,
    ReadMoisture,
    RotarySpin,
    Tool,
    VacuumPick,
    VacuumRelease,
    plan_move,
)
from .tasks import (
    Actuate,
    MoistureRead,
    Mount,
    MoveTo,
    PrimitiveStep,
    Scan,
    Sow,
    TaskRequest,
    Unmount,
    Wait,
    Water,
    Weed,
)


def nearest_neighbor_order(start: Coord2, targets: list[tuple[str, Coord2]]) -> list[tuple[str, Coord2]]:
    """Greedy visiting order: always the closest remaining target, ties broken
    by id so the route is deterministic. Deliberately not optimal."""
    remaining = list(targets)
    ordered = []
    here = start
    while remaining:
        best = min(remaining, key=lambda t: (here.distance_to(t[1]), t[0]))
        remaining.remove(best)
        ordered.append(best)
        here = best[1]
    return ordered


def resolve_water_targets(task_kind: Water, field: FieldState, user_id: str) -> list[Plant]:
    if task_kind.all_in_plot is not None:
        return sorted(
            field.live_plants(plot_id=task_kind.all_in_plot, owner=user_id),
            key=lambda p: p.id,
        )
    return [field.plant(pid) for pid in task_kind.plant_ids]


def scan_waypoints(cfg: GardenConfig, plot_id: str | None) -> list[Coord2]:
    """Boustrophedon sweep over the region at the configured grid pitch:
    row-major rows, alternating direction, one waypoint per grid cell center."""
    if plot_id is None:
        x0, y0 = 0, 0
        x1, y1 = cfg.field.width_mm, cfg.field.depth_mm
    else:
        plot = cfg.plot(plot_id)
        x0, y0 = plot.origin.x_mm, plot.origin.y_mm
        x1, y1 = x0 + plot.size_mm, y0 + plot.size_mm
    pitch = cfg.scan_grid_mm
    half = pitch // 2
    xs = list(range(x0 + half, x1, pitch))
    ys = list(range(y0 + half, y1, pitch))
    out = []
    for row, y in enumerate(ys):
        cols = xs if row % 2 == 0 else list(reversed(xs))
        out.extend(Coord2(x, y) for x in cols)
    return out


def compile_task(task: TaskRequest, field: FieldState, cfg: GardenConfig) -> list[PrimitiveStep]:
    kind = task.kind
    if isinstance(kind, Sow):
        return _compile_sow(kind, cfg)
    if isinstance(kind, Water):
        return _compile_water(kind, field, cfg, task.user_id)
    if isinstance(kind, Weed):
        return _compile_weed(kind, cfg)
    if isinstance(kind, Scan):
        return _compile_scan(kind, cfg)
    if isinstance(kind, MoistureRead):
        return _compile_moisture_read(kind, cfg)
    raise TypeError(f"unknown task kind {kind!r}")


def _compile_sow(kind: Sow, cfg: GardenConfig) -> list[PrimitiveStep]:
    if kind.species not in cfg.field.seed_containers or kind.species not in cfg.species:
        raise UnknownSpecies(
            f"no seed container for species {kind.species!r}", species_id=kind.species
        )
    if kind.target is None:
        raise EmptyTargetList("sow task reached the compiler without a position")
    spec = cfg.species_spec(kind.species)
    container = cfg.field.seed_containers[kind.species]
    t = kind.target
    depth = min(cfg.soil_z_mm + spec.seed_depth_mm, cfg.field.z_max_mm)
    return [
        Mount(Tool.SEEDER),
        MoveTo(Coord3(container.x_mm, container.y_mm, 0)),
        MoveTo(container),
        Actuate(VacuumPick(kind.species)),
        MoveTo(Coord3(container.x_mm, container.y_mm, 0)),
        MoveTo(Coord3(t.x_mm, t.y_mm, 0)),
        MoveTo(Coord3(t.x_mm, t.y_mm, depth)),
        Actuate(VacuumRelease()),
        MoveTo(Coord3(t.x_mm, t.y_mm, 0)),
        Unmount(),
    ]


def _compile_water(kind: Water, field: FieldState, cfg: GardenConfig,
                   user_id: str) -> list[PrimitiveStep]:
    plants = resolve_water_targets(kind, field, user_id)
    if not plants:
        raise EmptyTargetList("water task has no live targets")
    bay = cfg.field.tool_bay_slots[Tool.WATERING_NOZZLE.value]
    ordered = nearest_neighbor_order(
        Coord2(bay.x_mm, bay.y_mm), [(p.id, p.position) for p in plants]
    )
    by_id = {p.id: p for p in plants}
    steps: list[PrimitiveStep] = [Mount(Tool.WATERING_NOZZLE)]
    for plant_id, pos in ordered:
        spec = cfg.species_spec(by_id[plant_id].species_id)
        steps.append(MoveTo(Coord3(pos.x_mm, pos.y_mm, cfg.watering_z_mm)))
        steps.append(Actuate(DispenseWater(spec.water_volume_ml)))
    steps.append(Unmount())
    return steps


def _compile_weed(kind: Weed, cfg: GardenConfig) -> list[PrimitiveStep]:
    t = kind.target
    return [
        Mount(Tool.WEEDER),
        MoveTo(Coord3(t.x_mm, t.y_mm, 0)),
        MoveTo(Coord3(t.x_mm, t.y_mm, cfg.soil_z_mm)),
        Actuate(RotarySpin(cfg.rotary_spin_s)),
        MoveTo(Coord3(t.x_mm, t.y_mm, 0)),
        Unmount(),
    ]


def _compile_scan(kind: Scan, cfg: GardenConfig) -> list[PrimitiveStep]:
    steps: list[PrimitiveStep] = []
    for wp in scan_waypoints(cfg, kind.plot_id):
        steps.append(MoveTo(Coord3(wp.x_mm, wp.y_mm, cfg.scan_z_mm)))
        steps.append(Actuate(CaptureImage()))
    if not steps:
        raise EmptyTargetList("scan region contains no grid cells")
    return steps


def _compile_moisture_read(kind: MoistureRead, cfg: GardenConfig) -> list[PrimitiveStep]:
    t = kind.target
    return [
        Mount(Tool.MOISTURE_PROBE),
        MoveTo(Coord3(t.x_mm, t.y_mm, 0)),
        MoveTo(Coord3(t.x_mm, t.y_mm, cfg.soil_z_mm)),
        Actuate(ReadMoisture()),
        MoveTo(Coord3(t.x_mm, t.y_mm, 0)),
        Unmount(),
    ]


# -- well-formedness and duration --------------------------------------------------

def check_well_formed(steps: list[PrimitiveStep]) -> None:
    """Raise MalformedSequence unless every actuation has its tool mounted and
    mounts pair with unmounts (a sequence that mounts must end unmounted)."""
    mounted: Tool | None = None
    began_with_mount = bool(steps) and isinstance(steps[0], Mount)
    for i, step in enumerate(steps):
        if isinstance(step, Mount):
            if mounted is not None:
                raise MalformedSequence(f"step {i}: mount while {mounted.value} mounted")
            mounted = step.tool
        elif isinstance(step, Unmount):
            if mounted is None:
                raise MalformedSequence(f"step {i}: unmount with no tool mounted")
            mounted = None
        elif isinstance(step, Actuate):
            required = REQUIRED_TOOL[type(step.action)]
            if required is not None and mounted != required:
                raise MalformedSequence(
                    f"step {i}: {type(step.action).__name__} requires "
                    f"{required.value}, mounted: {mounted.value if mounted else 'none'}"
                )
        elif isinstance(step, Wait):
            if step.duration_s < 0:
                raise MalformedSequence(f"step {i}: negative wait")
        elif not isinstance(step, MoveTo):
            raise MalformedSequence(f"step {i}: unknown step {step!r}")
    if began_with_mount and mounted is not None:
        raise MalformedSequence("sequence began with a mount but never unmounts")


def estimate_duration(steps: list[PrimitiveStep], cfg: GardenConfig,
                      start: Coord3 | None = None) -> float:
    """Simulated seconds to run the sequence from `start` (default: home).

    Mirrors the executor: motion uses the per-axis-max kinematics including
    the bay travel inside mount/unmount; actuations use fixed config times.
    """
    check_well_formed(steps)
    speeds = cfg.field.axis_speed_mm_per_s
    pos = start if start is not None else cfg.field.home_position
    mounted: Tool | None = None
    total = 0.0

    def travel(to: Coord3) -> None:
        nonlocal pos, total
        total += plan_move(pos, to, speeds).duration_s
        pos = to

    for step in steps:
        if isinstance(step, MoveTo):
            travel(step.target)
        elif isinstance(step, Mount):
            slot = cfg.field.tool_bay_slots[step.tool.value]
            travel(Coord3(slot.x_mm, slot.y_mm, 0))
            travel(slot)
            total += cfg.engage_s
            travel(Coord3(slot.x_mm, slot.y_mm, 0))
            mounted = step.tool
        elif isinstance(step, Unmount):
            assert mounted is not None
            slot = cfg.field.tool_bay_slots[mounted.value]
            travel(Coord3(slot.x_mm, slot.y_mm, 0))
            travel(slot)
            total += cfg.engage_s
            travel(Coord3(slot.x_mm, slot.y_mm, 0))
            mounted = None
        elif isinstance(step, Actuate):
            a = step.action
            if isinstance(a, DispenseWater):
                total += cfg.dispense_s
            elif isinstance(a, VacuumPick):
                total += cfg.vacuum_pick_s
            elif isinstance(a, VacuumRelease):
                total += cfg.vacuum_release_s
            elif isinstance(a, RotarySpin):
                total += a.duration_s
            elif isinstance(a, CaptureImage):
                total += cfg.capture_s
            elif isinstance(a, ReadMoisture):
                total += cfg.read_moisture_s
        elif isinstance(step, Wait):
            total += step.duration_s
    return total
