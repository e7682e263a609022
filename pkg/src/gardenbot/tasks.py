"""High-level task requests and the primitive steps they compile to.

A task is what a user (or the automated planner) asks for; a primitive step
is one gantry instruction. The compiler module owns the translation.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Any

from .coords import Coord2, Coord3
from .gantry import (
    Action,
    CaptureImage,
    DispenseWater,
    ReadMoisture,
    RotarySpin,
    Tool,
    VacuumPick,
    VacuumRelease,
)

# -- task kinds ----------------------------------------------------------------

@dataclass(frozen=True)
class Sow:
    species: str
    target: Coord2 | None = None      # None: placement is delegated to auto_place


@dataclass(frozen=True)
class Water:
    plant_ids: tuple[str, ...] = ()
    all_in_plot: str | None = None    # "water all" over one plot


@dataclass(frozen=True)
class Weed:
    target: Coord2


@dataclass(frozen=True)
class Scan:
    plot_id: str | None = None        # None scans the whole field


@dataclass(frozen=True)
class MoistureRead:
    target: Coord2


TaskKind = Sow | Water | Weed | Scan | MoistureRead

KIND_NAMES: dict[type, str] = {
    Sow: "sow",
    Water: "water",
    Weed: "weed",
    Scan: "scan",
    MoistureRead: "moisture_read",
}


@dataclass(frozen=True)
class TaskRequest:
    id: str
    user_id: str
    kind: TaskKind
    submitted_at: datetime
    origin: str = "user"              # "user" or "auto_planner"

    @property
    def kind_name(self) -> str:
        return KIND_NAMES[type(self.kind)]


# -- primitive steps -------------------------------------------------------------

@dataclass(frozen=True)
class MoveTo:
    target: Coord3


@dataclass(frozen=True)
class Mount:
    tool: Tool


@dataclass(frozen=True)
class Unmount:
    pass


@dataclass(frozen=True)
class Actuate:
    action: Action


@dataclass(frozen=True)
class Wait:
    duration_s: float


PrimitiveStep = MoveTo | Mount | Unmount | Actuate | Wait


# -- serialization (journal records and API payloads) ------------------------------

def kind_to_dict(kind: TaskKind) -> dict[str, Any]:
    if isinstance(kind, Sow):
        return {
            "kind": "sow",
            "species": kind.species,
            "target": list(kind.target.as_tuple()) if kind.target else None,
        }
    if isinstance(kind, Water):
        return {
            "kind": "water",
            "plant_ids": list(kind.plant_ids),
            "all_in_plot": kind.all_in_plot,
        }
    if isinstance(kind, Weed):
        return {"kind": "weed", "target": list(kind.target.as_tuple())}
    if isinstance(kind, Scan):
        return {"kind": "scan", "plot_id": kind.plot_id}
    if isinstance(kind, MoistureRead):
        return {"kind": "moisture_read", "target": list(kind.target.as_tuple())}
    raise TypeError(f"unknown task kind {kind!r}")


def kind_from_dict(doc: dict[str, Any]) -> TaskKind:
    name = doc["kind"]
    if name == "sow":
        t = doc.get("target")
        return Sow(doc["species"], Coord2(*t) if t else None)
    if name == "water":
        return Water(tuple(doc.get("plant_ids", ())), doc.get("all_in_plot"))
    if name == "weed":
        return Weed(Coord2(*doc["target"]))
    if name == "scan":
        return Scan(doc.get("plot_id"))
    if name == "moisture_read":
        return MoistureRead(Coord2(*doc["target"]))
    raise ValueError(f"unknown task kind name {name!r}")


def task_to_dict(task: TaskRequest) -> dict[str, Any]:
    return {
        "id": task.id,
        "user_id": task.user_id,
        "submitted_at": task.submitted_at.isoformat(),
        "origin": task.origin,
        **kind_to_dict(task.kind),
    }


def task_from_dict(doc: dict[str, Any]) -> TaskRequest:
    return TaskRequest(
        id=doc["id"],
        user_id=doc["user_id"],
        kind=kind_from_dict(doc),
        submitted_at=datetime.fromisoformat(doc["submitted_at"]),
        origin=doc.get("origin", "user"),
    )


def action_to_dict(action: Action) -> dict[str, Any]:
    if isinstance(action, DispenseWater):
        return {"action": "dispense_water", "volume_ml": action.volume_ml}
    if isinstance(action, VacuumPick):
        return {"action": "vacuum_pick", "species": action.species}
    if isinstance(action, VacuumRelease):
        return {"action": "vacuum_release"}
    if isinstance(action, RotarySpin):
        return {"action": "rotary_spin", "duration_s": action.duration_s}
    if isinstance(action, CaptureImage):
        return {"action": "capture_image"}
    if isinstance(action, ReadMoisture):
        return {"action": "read_moisture"}
    raise TypeError(f"unknown action {action!r}")


def step_to_dict(step: PrimitiveStep) -> dict[str, Any]:
    if isinstance(step, MoveTo):
        return {"step": "move_to", "target": list(step.target.as_tuple())}
    if isinstance(step, Mount):
        return {"step": "mount", "tool": step.tool.value}
    if isinstance(step, Unmount):
        return {"step": "unmount"}
    if isinstance(step, Actuate):
        return {"step": "actuate", **action_to_dict(step.action)}
    if isinstance(step, Wait):
        return {"step": "wait", "duration_s": step.duration_s}
    raise TypeError(f"unknown step {step!r}")
