"""Shared robot access: the FCFS queue and the automated daily planner.

The queue is multi-producer (API sessions, planner) and single-consumer
(the engine's execution loop). Execution order is exactly enqueue order,
with ties at identical timestamps broken by (user_id, task id). The
planner runs once per simulated day and emits watering, weeding, and the
shared field scan for users in automated mode.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Callable

from .config import GardenConfig
from .errors import (
    DuplicateWithinDebounce,
    NotCancellable,
    QueueEmpty,
    QueueFull,
    RobotBusy,
    UnknownTask,
)
from .field import FieldState
from .gantry import MoistureField
from .policy import Mode, ModeTable
from .tasks import Scan, TaskRequest, Water, Weed, task_from_dict, task_to_dict
from .weather import WeatherSample


@dataclass
class QueueEntry:
    task: TaskRequest
    enqueued_at: datetime
    state: str = "pending"            # pending | executing | done | failed | cancelled
    estimate_s: float = 0.0
    result: dict[str, Any] | None = None
    timeline_event_id: int | None = None
    started_at: datetime | None = None
    finished_at: datetime | None = None

    def sort_key(self) -> tuple[datetime, str, str]:
        return (self.enqueued_at, self.task.user_id, self.task.id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": task_to_dict(self.task),
            "enqueued_at": self.enqueued_at.isoformat(),
            "state": self.state,
            "estimate_s": self.estimate_s,
            "result": self.result,
            "timeline_event_id": self.timeline_event_id,
            "started_at": self.started_at.isoformat() if self.started_at else None,
            "finished_at": self.finished_at.isoformat() if self.finished_at else None,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "QueueEntry":
        return cls(
            task=task_from_dict(doc["task"]),
            enqueued_at=datetime.fromisoformat(doc["enqueued_at"]),
            state=doc["state"],
            estimate_s=doc["estimate_s"],
            result=doc["result"],
            timeline_event_id=doc["timeline_event_id"],
            started_at=(datetime.fromisoformat(doc["started_at"])
                        if doc.get("started_at") else None),
            finished_at=(datetime.fromisoformat(doc["finished_at"])
                         if doc.get("finished_at") else None),
        )


class TaskQueue:
    """FCFS queue with a capacity cap and the repeat-tap guard for
    plot-wide watering."""

    def __init__(self, cfg: GardenConfig) -> None:
        self.cfg = cfg
        self._lock = threading.Lock()
        self.entries: dict[str, QueueEntry] = {}
        self._last_water_all: dict[tuple[str, str], datetime] = {}

    # -- producers -------------------------------------------------------------

    def submit(self, task: TaskRequest, now: datetime, estimate_s: float = 0.0) -> int:
        with self._lock:
            kind = task.kind
            if isinstance(kind, Water) and kind.all_in_plot is not None:
                key = (task.user_id, kind.all_in_plot)
                last = self._last_water_all.get(key)
                if (last is not None
                        and (now - last).total_seconds() < self.cfg.water_all_debounce_s):
                    raise DuplicateWithinDebounce(
                        f"water-all for {kind.all_in_plot} was already submitted "
                        f"{(now - last).total_seconds():.0f} s ago",
                        plot_id=kind.all_in_plot,
                        window_s=self.cfg.water_all_debounce_s,
                    )
            pending = [e for e in self.entries.values() if e.state == "pending"]
            if len(pending) >= self.cfg.queue_cap:
                raise QueueFull(f"queue holds {len(pending)} pending tasks",
                                cap=self.cfg.queue_cap)
            if task.id in self.entries:
                raise ValueError(f"duplicate task id {task.id}")
            entry = QueueEntry(task=task, enqueued_at=now, estimate_s=estimate_s)
            self.entries[task.id] = entry
            if isinstance(kind, Water) and kind.all_in_plot is not None:
                self._last_water_all[(task.user_id, kind.all_in_plot)] = now
            ordered = sorted(
                (e for e in self.entries.values() if e.state == "pending"),
                key=QueueEntry.sort_key,
            )
            return ordered.index(entry) + 1

    def cancel(self, task_id: str, user_id: str) -> QueueEntry:
        with self._lock:
            entry = self.entries.get(task_id)
            if entry is None:
                raise UnknownTask(f"no task {task_id!r}", task_id=task_id)
            if entry.task.user_id != user_id:
                raise NotCancellable("only the submitting user may cancel",
                                     task_id=task_id)
            if entry.state != "pending":
                raise NotCancellable(f"task is {entry.state}", task_id=task_id,
                                     state=entry.state)
            entry.state = "cancelled"
            return entry

    # -- the single consumer ------------------------------------------------------

    def begin_next(self, now: datetime | None = None) -> QueueEntry:
        """Claim the head pending entry for execution."""
        with self._lock:
            if any(e.state == "executing" for e in self.entries.values()):
                raise RobotBusy("an entry is already executing")
            pending = sorted(
                (e for e in self.entries.values() if e.state == "pending"),
                key=QueueEntry.sort_key,
            )
            if not pending:
                raise QueueEmpty("no pending tasks")
            head = pending[0]
            head.state = "executing"
            head.started_at = now
            return head

    def finish(self, entry: QueueEntry, state: str, result: dict[str, Any],
               timeline_event_id: int | None,
               now: datetime | None = None) -> None:
        if state not in ("done", "failed"):
            raise ValueError(f"invalid terminal state {state!r}")
        with self._lock:
            entry.state = state
            entry.result = result
            entry.timeline_event_id = timeline_event_id
            entry.finished_at = now

    # -- observers ----------------------------------------------------------------

    def pending_count(self) -> int:
        with self._lock:
            return sum(1 for e in self.entries.values() if e.state == "pending")

    def executing_entry(self) -> QueueEntry | None:
        with self._lock:
            for e in self.entries.values():
                if e.state == "executing":
                    return e
            return None

    def snapshot(self) -> list[dict[str, Any]]:
        """Consistent view: the executing entry first (flagged, no position),
        then pending entries with 1-based positions and cumulative waits."""
        with self._lock:
            out = []
            for e in self.entries.values():
                if e.state == "executing":
                    out.append({
                        "task_id": e.task.id,
                        "user_id": e.task.user_id,
                        "kind": e.task.kind_name,
                        "state": "executing",
                        "position": None,
                        "estimate_s": e.estimate_s,
                        "cumulative_wait_s": 0.0,
                    })
            cumulative = 0.0
            pending = sorted(
                (e for e in self.entries.values() if e.state == "pending"),
                key=QueueEntry.sort_key,
            )
            for i, e in enumerate(pending, start=1):
                cumulative += e.estimate_s
                out.append({
                    "task_id": e.task.id,
                    "user_id": e.task.user_id,
                    "kind": e.task.kind_name,
                    "state": "pending",
                    "position": i,
                    "estimate_s": e.estimate_s,
                    "cumulative_wait_s": cumulative,
                })
            return out

    def entry(self, task_id: str) -> QueueEntry:
        with self._lock:
            e = self.entries.get(task_id)
            if e is None:
                raise UnknownTask(f"no task {task_id!r}", task_id=task_id)
            return e

    # -- persistence -----------------------------------------------------------------

    def snapshot_state(self) -> dict[str, Any]:
        with self._lock:
            return {
                "entries": [e.to_dict() for e in self.entries.values()],
                "last_water_all": {
                    f"{u}|{p}": t.isoformat()
                    for (u, p), t in sorted(self._last_water_all.items())
                },
            }

    def restore_state(self, snap: dict[str, Any]) -> None:
        with self._lock:
            self.entries = {}
            for doc in snap["entries"]:
                e = QueueEntry.from_dict(doc)
                self.entries[e.task.id] = e
            self._last_water_all = {}
            for key, iso in snap["last_water_all"].items():
                u, p = key.split("|", 1)
                self._last_water_all[(u, p)] = datetime.fromisoformat(iso)


@dataclass
class DailyPlanner:
    """Once-a-day batch for automated-mode users.

    Emits one multi-target Water per user covering every live plant whose
    cell moisture is below its species threshold (skipped while raining if
    the cell already holds the suspend threshold), one Weed per weed mark
    in their plots, and a single shared whole-field Scan. A day guard makes
    the batch idempotent per simulated day.
    """

    cfg: GardenConfig
    last_planned_day: int | None = None

    def plan(
        self,
        day: int,
        now: datetime,
        weather: WeatherSample,
        field: FieldState,
        modes: ModeTable,
        moisture: MoistureField,
        user_plots: dict[str, str],
        make_id: Callable[[], str],
    ) -> list[TaskRequest]:
        if self.last_planned_day is not None and day <= self.last_planned_day:
            return []
        self.last_planned_day = day

        tasks: list[TaskRequest] = []
        for user_id in modes.users_in(Mode.AUTOMATED):
            water_ids = []
            for plant in sorted(field.live_plants(owner=user_id), key=lambda p: p.id):
                cell = moisture.value_at(plant.position)
                if cell >= self.cfg.species_spec(plant.species_id).moisture_threshold:
                    continue
                if weather.raining and cell >= self.cfg.rain_suspend_threshold:
                    continue
                water_ids.append(plant.id)
            if water_ids:
                tasks.append(TaskRequest(
                    id=make_id(), user_id=user_id,
                    kind=Water(plant_ids=tuple(water_ids)),
                    submitted_at=now, origin="auto_planner",
                ))
            plot_id = user_plots.get(user_id)
            for weed in sorted(field.live_weeds(), key=lambda w: w.id):
                if weed.plot_id == plot_id:
                    tasks.append(TaskRequest(
                        id=make_id(), user_id=user_id,
                        kind=Weed(target=weed.position),
                        submitted_at=now, origin="auto_planner",
                    ))
        tasks.append(TaskRequest(
            id=make_id(), user_id="robot", kind=Scan(plot_id=None),
            submitted_at=now, origin="auto_planner",
        ))
        return tasks

    def snapshot_state(self) -> dict[str, Any]:
        return {"last_planned_day": self.last_planned_day}

    def restore_state(self, snap: dict[str, Any]) -> None:
        self.last_planned_day = snap["last_planned_day"]
