"""Control modes and action validation.

Three per-user modes share one rule set: Manual surfaces rule violations as
non-binding warnings, Hybrid turns the same findings into rejections, and
Automated delegates care to the planner (interactive watering and weeding
are turned away; sowing is accepted only without an explicit position so
placement stays with the grid algorithm). Cross-plot actions are hard
errors in every mode; read-only sensing is always allowed.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from datetime import datetime, timedelta
from enum import Enum
from typing import Any, Iterable

from .config import GardenConfig, Plot
from .coords import Coord2
from .errors import CrossPlotTarget, PlacementExhausted
from .field import FieldState, Plant
from .gantry import MoistureField
from .tasks import MoistureRead, Scan, Sow, TaskRequest, Water, Weed


class Mode(str, Enum):
    MANUAL = "manual"
    HYBRID = "hybrid"
    AUTOMATED = "automated"


@dataclass(frozen=True)
class Finding:
    rule_id: str
    reason: str
    entities: dict[str, Any]


@dataclass(frozen=True)
class ValidationOutcome:
    verdict: str                      # ok | warnings | rejected
    findings: tuple[Finding, ...] = ()

    @property
    def permitted(self) -> bool:
        return self.verdict != "rejected"

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "findings": [
                {"rule_id": f.rule_id, "reason": f.reason, "entities": f.entities}
                for f in self.findings
            ],
        }


RULE_SPACING = "R1"
RULE_OVERWATER = "R2"
RULE_FIELD_MARGIN = "R3"
RULE_AUTOMATED_PLACEMENT = "A1"
RULE_AUTOMATED_CARE = "A2"


def spacing_conflicts(cfg: GardenConfig, position: Coord2, species_id: str,
                      live_plants: Iterable[Plant]) -> list[Finding]:
    """R1: too close when center distance is strictly below the sum of spread
    radii; exactly the sum is legal. Checked against every live plant
    regardless of owner, since overgrowth crosses plot borders."""
    r_new = cfg.species_spec(species_id).spread_radius_mm
    out = []
    for q in live_plants:
        r_q = cfg.species_spec(q.species_id).spread_radius_mm
        d = position.distance_to(q.position)
        if d < r_new + r_q:
            out.append(Finding(
                RULE_SPACING,
                f"too close to {q.species_id} {q.id}: {d:.1f} mm apart, "
                f"needs {r_new + r_q:.0f} mm",
                {"plant_id": q.id, "distance_mm": d, "required_mm": float(r_new + r_q)},
            ))
    return out


def field_margin_conflict(cfg: GardenConfig, position: Coord2,
                          species_id: str) -> Finding | None:
    """R3: the mature growth circle must stay inside the field."""
    r = cfg.species_spec(species_id).spread_radius_mm
    f = cfg.field
    if (position.x_mm - r < 0 or position.y_mm - r < 0
            or position.x_mm + r > f.width_mm or position.y_mm + r > f.depth_mm):
        return Finding(
            RULE_FIELD_MARGIN,
            f"growth circle (radius {r} mm) would extend outside the field",
            {"position": list(position.as_tuple()), "radius_mm": r},
        )
    return None


def overwater_findings(cfg: GardenConfig, plants: Iterable[Plant],
                       moisture: MoistureField, now: datetime) -> list[Finding]:
    """R2: watering a cell already at/above the overwater threshold, or the
    same plant again within the repeat window."""
    out = []
    window = timedelta(seconds=cfg.rewater_window_s)
    for p in plants:
        cell = moisture.value_at(p.position)
        if cell >= cfg.overwater_threshold:
            out.append(Finding(
                RULE_OVERWATER,
                f"{p.id} sits at moisture {cell:.2f}, already at the "
                f"overwatering threshold",
                {"plant_id": p.id, "moisture": cell},
            ))
        elif p.last_watered_at is not None and now - p.last_watered_at < window:
            ago = (now - p.last_watered_at).total_seconds()
            out.append(Finding(
                RULE_OVERWATER,
                f"{p.id} was watered {ago:.0f} s ago, within the repeat window",
                {"plant_id": p.id, "last_watered_s_ago": ago},
            ))
    return out


def _check_own_plot(cfg: GardenConfig, position: Coord2, user_plot_id: str,
                    what: str) -> None:
    plot = cfg.field.plot_at(position)
    if plot is None or plot.plot_id != user_plot_id:
        raise CrossPlotTarget(
            f"{what} at {position.as_tuple()} is outside your plot {user_plot_id}",
            target=list(position.as_tuple()),
            plot_id=plot.plot_id if plot else None,
        )


def validate(task: TaskRequest, mode: Mode, field: FieldState,
             moisture: MoistureField, now: datetime,
             user_plot_id: str) -> ValidationOutcome:
    """Evaluate the rule set for one task under one mode.

    Raises CrossPlotTarget/UnknownPlant for hard errors; everything else is
    reported in the outcome. Planner-originated tasks are robot actions and
    are never mode-rejected.
    """
    cfg = field.cfg
    kind = task.kind
    interactive = task.origin == "user"

    # hard spatial rule first, every mode: stay inside your own plot
    if isinstance(kind, Sow) and kind.target is not None:
        _check_own_plot(cfg, kind.target, user_plot_id, "sow target")
    elif isinstance(kind, Water):
        if kind.all_in_plot is not None and kind.all_in_plot != user_plot_id:
            raise CrossPlotTarget(
                f"water-all over {kind.all_in_plot} is not your plot {user_plot_id}",
                plot_id=kind.all_in_plot,
            )
        for pid in kind.plant_ids:
            p = field.plant(pid)
            if p.plot_id != user_plot_id:
                raise CrossPlotTarget(
                    f"plant {pid} is in {p.plot_id}, not your plot {user_plot_id}",
                    plant_id=pid, plot_id=p.plot_id,
                )
    elif isinstance(kind, (Weed, MoistureRead)):
        _check_own_plot(cfg, kind.target, user_plot_id, "target")
    # Scan is read-only and may cover the whole field

    findings: list[Finding] = []

    if mode is Mode.AUTOMATED and interactive:
        if isinstance(kind, Sow) and kind.target is not None:
            findings.append(Finding(
                RULE_AUTOMATED_PLACEMENT,
                "automated mode places seeds itself; submit without a position",
                {},
            ))
        if isinstance(kind, (Water, Weed)) and cfg.reject_interactive_care_in_automated:
            findings.append(Finding(
                RULE_AUTOMATED_CARE,
                "automated mode already schedules this care; request is redundant",
                {"kind": task.kind_name},
            ))
        if findings:
            return ValidationOutcome("rejected", tuple(findings))

    if isinstance(kind, Sow) and kind.target is not None:
        findings.extend(spacing_conflicts(cfg, kind.target, kind.species,
                                          field.live_plants()))
        margin = field_margin_conflict(cfg, kind.target, kind.species)
        if margin:
            findings.append(margin)
    elif isinstance(kind, Water):
        if kind.all_in_plot is not None:
            targets = field.live_plants(plot_id=kind.all_in_plot, owner=task.user_id)
        else:
            targets = [field.plant(pid) for pid in kind.plant_ids]
        findings.extend(overwater_findings(cfg, targets, moisture, now))

    if not findings:
        return ValidationOutcome("ok")
    if mode is Mode.HYBRID and interactive:
        return ValidationOutcome("rejected", tuple(findings))
    return ValidationOutcome("warnings", tuple(findings))


# -- automated placement ------------------------------------------------------------

def placement_grid(plot: Plot, radius_mm: int) -> list[Coord2]:
    """Row-major grid with margin = radius and pitch = 2 × radius."""
    pitch = 2 * radius_mm
    xs = range(plot.origin.x_mm + radius_mm, plot.origin.x_mm + plot.size_mm - radius_mm + 1, pitch)
    ys = range(plot.origin.y_mm + radius_mm, plot.origin.y_mm + plot.size_mm - radius_mm + 1, pitch)
    return [Coord2(x, y) for y in ys for x in xs]


def auto_place(cfg: GardenConfig, species_id: str, count: int, plot: Plot,
               existing_plants: Iterable[Plant]) -> list[Coord2]:
    """Pick `count` legal grid positions in row-major order, skipping cells
    that would violate spacing against existing live plants."""
    if count < 1:
        raise ValueError("count must be >= 1")
    spec = cfg.species_spec(species_id)
    existing = [p for p in existing_plants if p.live]
    chosen: list[Coord2] = []
    for cell in placement_grid(plot, spec.spread_radius_mm):
        if spacing_conflicts(cfg, cell, species_id, existing):
            continue
        chosen.append(cell)
        if len(chosen) == count:
            return chosen
    raise PlacementExhausted(
        f"only {len(chosen)} legal positions for {count} × {species_id} in {plot.plot_id}",
        available=len(chosen), requested=count,
    )


# -- mode table ---------------------------------------------------------------------

@dataclass(frozen=True)
class ModeChange:
    timestamp: datetime
    user_id: str
    old: Mode
    new: Mode


@dataclass
class ModeTable:
    """Current mode per user plus the append-only change log."""

    modes: dict[str, Mode] = dc_field(default_factory=dict)
    log: list[ModeChange] = dc_field(default_factory=list)

    def mode_of(self, user_id: str) -> Mode:
        return self.modes.get(user_id, Mode.MANUAL)

    def switch(self, user_id: str, new_mode: Mode, now: datetime) -> ModeChange:
        """Record the switch; switching to the current mode is a recorded no-op."""
        change = ModeChange(now, user_id, self.mode_of(user_id), new_mode)
        self.modes[user_id] = new_mode
        self.log.append(change)
        return change

    def users_in(self, mode: Mode) -> list[str]:
        return sorted(u for u, m in self.modes.items() if m is mode)

    def snapshot(self) -> dict[str, Any]:
        return {
            "modes": {u: m.value for u, m in sorted(self.modes.items())},
            "log": [
                {
                    "timestamp": c.timestamp.isoformat(),
                    "user_id": c.user_id,
                    "old": c.old.value,
                    "new": c.new.value,
                }
                for c in self.log
            ],
        }

    def restore(self, snap: dict[str, Any]) -> None:
        self.modes = {u: Mode(m) for u, m in snap["modes"].items()}
        self.log = [
            ModeChange(
                datetime.fromisoformat(c["timestamp"]), c["user_id"],
                Mode(c["old"]), Mode(c["new"]),
            )
            for c in snap["log"]
        ]


def mode_day_matrix(initial_modes: dict[str, Mode], log: list[ModeChange],
                    epoch: datetime, days: int) -> dict[str, list[Mode]]:
    """Per user and per day, the mode that held for the most time that day
    (ties go to the mode that reached that share first). This reconstructs
    the day-by-day mode ribbon from the change log alone."""
    out: dict[str, list[Mode]] = {}
    for user, initial in initial_modes.items():
        changes = sorted(
            (c for c in log if c.user_id == user), key=lambda c: c.timestamp
        )
        row: list[Mode] = []
        for day in range(days):
            start = epoch + timedelta(days=day)
            end = start + timedelta(days=1)
            # mode at day start
            current = initial
            for c in changes:
                if c.timestamp <= start:
                    current = c.new
                else:
                    break
            occupancy: dict[Mode, float] = {}
            order: list[Mode] = []
            cursor = start
            for c in changes:
                if c.timestamp <= start or c.timestamp >= end:
                    continue
                occupancy[current] = occupancy.get(current, 0.0) + (
                    (c.timestamp - cursor).total_seconds()
                )
                if current not in order:
                    order.append(current)
                current = c.new
                cursor = c.timestamp
            occupancy[current] = occupancy.get(current, 0.0) + (end - cursor).total_seconds()
            if current not in order:
                order.append(current)
            best = max(order, key=lambda m: occupancy[m])
            row.append(best)
        out[user] = row
    return out
