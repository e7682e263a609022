"""Single-writer orchestration engine.

Every state change flows through one lock: task submission, queue
execution on the gantry, mode switches, chat, weed spawns, and the two
daily boundaries (planner batch, end-of-day tick). Each change is
journaled before its effects are applied, so the full state is always
fold(journal records), and crash recovery replays the log from the last
checkpoint, re-marking an interrupted task as failed.

Reads (views, snapshots, stream subscriptions) take the same lock briefly
and observe consistent points in time.
"""

from __future__ import annotations

import hashlib
import json
import queue as queue_mod
import random
import threading
from collections import deque
from dataclasses import replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Callable

from .accounts import Account, accounts_from_dicts, accounts_to_dicts, default_accounts
from .clock import DEFAULT_EPOCH, SimClock
from .compiler import compile_task, estimate_duration, nearest_neighbor_order, resolve_water_targets
from .config import GardenConfig, config_from_dict, config_to_dict, default_config
from .coords import Coord2
from .errors import (
    EmptyTargetList,
    GardenError,
    MessageTooLong,
    TaskRejected,
    Unauthenticated,
    WeatherUnavailable,
)
from .field import FieldState
from .gantry import (
    CaptureImage,
    DispenseWater,
    GantrySim,
    ReadMoisture,
    RotarySpin,
    Tool,
    VacuumRelease,
)
from .journal import JournalWriter, Record, read_journal, truncate_to_valid
from .policy import Mode, ModeTable, ValidationOutcome, auto_place, validate
from .scheduler import DailyPlanner, QueueEntry, TaskQueue
from .snapshots import TimelapseStore
from .tasks import (
    Actuate,
    MoveTo,
    Mount,
    Sow,
    TaskKind,
    TaskRequest,
    Unmount,
    Wait,
    Water,
    Weed,
    task_from_dict,
    task_to_dict,
)
from .weather import StubProvider, WeatherProvider, WeatherSample


class EventBus:
    """In-memory delta feed backing the live stream.

    Keeps a bounded ring of recent events for cursor-based resume; every
    subscriber gets its own handoff queue. A subscriber that stops reading
    while the ring keeps filling is disconnected rather than allowed to
    stall the producer.
    """

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self._ring: deque[dict[str, Any]] = deque(maxlen=capacity)
        self._seq = 0
        self._subs: dict[int, queue_mod.Queue] = {}
        self._sub_seq = 0
        self._lock = threading.Lock()

    def publish(self, type: str, t: str, data: dict[str, Any]) -> int:
        with self._lock:
            self._seq += 1
            ev = {"seq": self._seq, "t": t, "type": type, "data": data}
            self._ring.append(ev)
            dead = []
            for sid, q in self._subs.items():
                if q.qsize() >= self.capacity:
                    dead.append(sid)
                    continue
                q.put(ev)
            for sid in dead:
                q = self._subs.pop(sid)
                q.put({"seq": self._seq, "t": t, "type": "stream.slow_consumer",
                       "data": {"detail": "event backlog overflow; resubscribe"}})
            return self._seq

    @property
    def last_seq(self) -> int:
        with self._lock:
            return self._seq

    def subscribe(self, after_seq: int | None = None
                  ) -> tuple[int, queue_mod.Queue, list[dict[str, Any]]]:
        """Register a consumer; returns (id, live queue, backlog). When the
        cursor has fallen off the ring, the backlog starts with a
        stream.reset event telling the client to refetch state."""
        with self._lock:
            self._sub_seq += 1
            sid = self._sub_seq
            q: queue_mod.Queue = queue_mod.Queue()
            backlog: list[dict[str, Any]] = []
            if after_seq is not None:
                oldest = self._ring[0]["seq"] if self._ring else self._seq + 1
                if after_seq + 1 < oldest and after_seq < self._seq:
                    backlog.append({
                        "seq": after_seq, "t": "", "type": "stream.reset",
                        "data": {"detail": "cursor expired; refetch full state"},
                    })
                backlog.extend(ev for ev in self._ring if ev["seq"] > after_seq)
            self._subs[sid] = q
            return sid, q, backlog

    def unsubscribe(self, sid: int) -> None:
        with self._lock:
            self._subs.pop(sid, None)


class GardenEngine:
    """The orchestrator. Construct fresh, or ``restore`` from a journal."""

    def __init__(
        self,
        cfg: GardenConfig | None = None,
        *,
        epoch: datetime | None = None,
        acceleration: float = 0.0,
        accounts: dict[str, Account] | None = None,
        weather: WeatherProvider | None = None,
        journal_path: str | Path | None = None,
        noise_seed: str | None = None,
        noise_sigma: float = 0.0,
        meta: dict[str, Any] | None = None,
    ) -> None:
        self.cfg = cfg or default_config()
        self.epoch = epoch or DEFAULT_EPOCH
        self.clock = SimClock(self.epoch, acceleration)
        self.bus = EventBus(self.cfg.stream_buffer)
        self.accounts = accounts if accounts is not None else default_accounts()
        self.gantry = GantrySim(self.cfg, self.clock, emit=self._emit)
        self.field = FieldState(self.cfg)
        self.timelapse = TimelapseStore(self.cfg)
        self.modes = ModeTable(
            modes={uid: a.initial_mode for uid, a in self.accounts.items()}
        )
        self.queue = TaskQueue(self.cfg)
        self.planner = DailyPlanner(self.cfg)
        self.weather: WeatherProvider = weather or StubProvider(self.epoch)
        self.chat: list[dict[str, Any]] = []
        self.noise_seed = noise_seed
        self.noise_sigma = noise_sigma
        self._task_seq = 0
        self._completed_days = 0
        self._last_weather: WeatherSample | None = None
        self._lock = threading.RLock()
        self._folding = False
        self.journal: JournalWriter | None = None
        if journal_path is not None:
            self.journal = JournalWriter(journal_path, meta=self._journal_meta(meta))

    # -- plumbing -----------------------------------------------------------------

    def _journal_meta(self, extra: dict[str, Any] | None) -> dict[str, Any]:
        return {
            "config": config_to_dict(self.cfg),
            "epoch": self.epoch.isoformat(),
            "accounts": accounts_to_dicts(self.accounts),
            "noise_seed": self.noise_seed,
            "noise_sigma": self.noise_sigma,
            "extra": extra or {},
        }

    def _emit(self, type: str, data: dict[str, Any]) -> None:
        self.bus.publish(type, self.clock.now().isoformat(), data)

    def _record(self, type: str, t: datetime, data: dict[str, Any]) -> None:
        if self.journal is not None and not self._folding:
            self.journal.append(type, t.isoformat(), data)

    def _make_task_id(self) -> str:
        self._task_seq += 1
        return f"t-{self._task_seq:06d}"

    def _bump_task_seq(self, task_id: str) -> None:
        try:
            n = int(task_id.rsplit("-", 1)[1])
        except (IndexError, ValueError):
            return
        self._task_seq = max(self._task_seq, n)

    def _noise_fn(self) -> Callable[[int, str], float] | None:
        if self.noise_seed is None or self.noise_sigma <= 0:
            return None
        seed = self.noise_seed
        sigma = self.noise_sigma

        def noise(day: int, plant_id: str) -> float:
            return random.Random(f"{seed}:{day}:{plant_id}").gauss(0.0, sigma)

        return noise

    def account(self, user_id: str) -> Account:
        acct = self.accounts.get(user_id)
        if acct is None:
            raise Unauthenticated(f"unknown user {user_id!r}", user_id=user_id)
        return acct

    def user_plots(self) -> dict[str, str]:
        return {uid: a.plot_id for uid, a in self.accounts.items()}

    def day_index(self, at: datetime | None = None) -> int:
        at = at or self.clock.now()
        return (at - self.epoch).days + 1

    # -- task submission -------------------------------------------------------------

    def submit_task(self, user_id: str, kind: TaskKind,
                    origin: str = "user") -> dict[str, Any]:
        with self._lock:
            now = self.clock.now()
            task = TaskRequest(self._make_task_id(), user_id, kind, now, origin)
            outcome = ValidationOutcome("ok")
            if origin == "user":
                acct = self.account(user_id)
                mode = self.modes.mode_of(user_id)
                task, outcome = self._validate_and_resolve(task, mode, acct, now)
            try:
                steps = compile_task(task, self.field, self.cfg)
                estimate = estimate_duration(steps, self.cfg)
            except EmptyTargetList:
                # all_in_plot resolves against the field at execution time;
                # queued sows may fill the plot before this task runs
                if not (isinstance(kind, Water) and kind.all_in_plot is not None):
                    raise
                estimate = 0.0
            position = self.queue.submit(task, now, estimate)
            self._record("submit", now, {
                "task": task_to_dict(task),
                "enqueued_at": now.isoformat(),
                "estimate_s": estimate,
                "position": position,
                "validation": outcome.to_dict(),
            })
            self._emit("queue.submitted", {
                "task_id": task.id, "user_id": user_id, "kind": task.kind_name,
                "position": position, "estimate_s": estimate,
                "origin": origin,
            })
            result: dict[str, Any] = {
                "task_id": task.id,
                "position": position,
                "estimate_s": estimate,
                "verdict": outcome.verdict,
                "findings": outcome.to_dict()["findings"],
            }
            if isinstance(task.kind, Sow) and task.kind.target is not None:
                result["resolved_target"] = list(task.kind.target.as_tuple())
            return result

    def _validate_and_resolve(
        self, task: TaskRequest, mode: Mode, acct: Account, now: datetime
    ) -> tuple[TaskRequest, ValidationOutcome]:
        """Mode-dependent ordering: automated mode validates first (an explicit
        sow position must be rejected before placement), the other modes
        resolve a missing position first and then validate the result."""
        kind = task.kind
        moisture = self.gantry.moisture

        def place(species: str) -> Coord2:
            plot = self.cfg.plot(acct.plot_id)
            return auto_place(self.cfg, species, 1, plot, self.field.live_plants())[0]

        if isinstance(kind, Sow) and mode is Mode.AUTOMATED:
            outcome = validate(task, mode, self.field, moisture, now, acct.plot_id)
            if not outcome.permitted:
                raise TaskRejected("task rejected by mode policy",
                                   findings=outcome.to_dict()["findings"])
            if kind.target is None:
                task = replace(task, kind=Sow(kind.species, place(kind.species)))
            return task, outcome

        if isinstance(kind, Sow) and kind.target is None:
            task = replace(task, kind=Sow(kind.species, place(kind.species)))

        outcome = validate(task, mode, self.field, moisture, now, acct.plot_id)
        if not outcome.permitted:
            raise TaskRejected("task rejected by mode policy",
                               findings=outcome.to_dict()["findings"])
        return task, outcome

    def cancel_task(self, user_id: str, task_id: str) -> dict[str, Any]:
        with self._lock:
            entry = self.queue.cancel(task_id, user_id)
            now = self.clock.now()
            self._record("cancel", now, {"task_id": task_id, "user_id": user_id})
            self._emit("queue.cancelled", {"task_id": task_id, "user_id": user_id})
            return {"task_id": task_id, "state": entry.state}

    # -- execution ---------------------------------------------------------------------

    def run_next_task(self) -> dict[str, Any]:
        with self._lock:
            t0 = self.clock.now()
            entry = self.queue.begin_next(t0)
            self._record("exec_begin", t0, {"task_id": entry.task.id})
            self._emit("queue.executing", {
                "task_id": entry.task.id, "user_id": entry.task.user_id,
                "kind": entry.task.kind_name,
            })
            self._execute_entry(entry)
            t1 = self.clock.now()
            self._record("exec_end", t1, {
                "task_id": entry.task.id,
                "state": entry.state,
                "result": entry.result,
            })
            return {
                "task_id": entry.task.id,
                "state": entry.state,
                "result": entry.result,
                "started_at": t0.isoformat(),
                "finished_at": t1.isoformat(),
            }

    def drain_queue(self) -> int:
        """Run pending tasks until the queue is empty; returns the count."""
        ran = 0
        with self._lock:
            while self.queue.pending_count() > 0:
                self.run_next_task()
                ran += 1
        return ran

    def _execute_entry(self, entry: QueueEntry) -> None:
        """Replay the compiled steps on the gantry and apply field effects at
        the matching actuations. Fails soft on domain errors: the entry is
        marked failed, the gantry is brought back to a safe state, and the
        queue continues."""
        task = entry.task
        kind = task.kind
        result: dict[str, Any] = {}
        state = "done"
        try:
            steps = compile_task(task, self.field, self.cfg)
            water_order: list[str] = []
            if isinstance(kind, Water):
                plants = resolve_water_targets(kind, self.field, task.user_id)
                bay = self.cfg.field.tool_bay_slots[Tool.WATERING_NOZZLE.value]
                water_order = [
                    pid for pid, _ in nearest_neighbor_order(
                        Coord2(bay.x_mm, bay.y_mm),
                        [(p.id, p.position) for p in plants],
                    )
                ]
            dispense_i = 0
            captures = 0
            for step in steps:
                if isinstance(step, MoveTo):
                    self.gantry.move_to(step.target)
                elif isinstance(step, Mount):
                    self.gantry.mount_tool(step.tool.value)
                elif isinstance(step, Unmount):
                    self.gantry.unmount_tool()
                elif isinstance(step, Wait):
                    self.gantry.wait(step.duration_s)
                elif isinstance(step, Actuate):
                    res = self.gantry.actuate(step.action)
                    now = self.clock.now()
                    if isinstance(step.action, VacuumRelease) and isinstance(kind, Sow):
                        plant = self.field.add_plant(
                            task.user_id, kind.species, kind.target,
                            now, self.day_index(now),
                        )
                        result["plant_id"] = plant.id
                        self._emit("plant.created", plant.to_dict())
                    elif isinstance(step.action, DispenseWater) and isinstance(kind, Water):
                        pid = water_order[dispense_i]
                        dispense_i += 1
                        self.field.mark_watered(pid, now)
                        self._emit("plant.watered", {
                            "plant_id": pid, "moisture": res.value,
                        })
                    elif isinstance(step.action, RotarySpin) and isinstance(kind, Weed):
                        effects = self.field.apply_weeding(kind.target, now)
                        result.update(effects)
                        self._emit("weed.cleared", effects)
                        for pid in effects["plants_removed"]:
                            self._emit("plant.removed", {"plant_id": pid})
                    elif isinstance(step.action, ReadMoisture):
                        result["moisture"] = res.value
                    elif isinstance(step.action, CaptureImage):
                        captures += 1
            if captures:
                result["captures"] = captures
            if isinstance(kind, Water):
                result["watered"] = water_order
        except GardenError as exc:
            state = "failed"
            result = {"error": exc.to_payload()}
            self._recover_gantry()

        now = self.clock.now()
        actor = "robot" if task.origin == "auto_planner" else task.user_id
        event = self.field.timeline.record(now, actor, task.kind_name, {
            "task_id": task.id,
            "user_id": task.user_id,
            "origin": task.origin,
            "state": state,
            "result": result,
        })
        self.queue.finish(entry, state, result, event.id, now)
        self._emit(f"queue.{state}", {
            "task_id": task.id, "user_id": task.user_id, "kind": task.kind_name,
            "state": state, "result": result, "timeline_event_id": event.id,
        })
        self._emit("timeline.event", event.to_dict())

    def _recover_gantry(self) -> None:
        """Return the gantry to a dispatchable state after a failed task."""
        if self.gantry.seed_held is not None:
            self.gantry.seed_held = None
        if self.gantry.mounted_tool is not None:
            self.gantry.unmount_tool()

    # -- mode switches, chat, weeds --------------------------------------------------

    def switch_mode(self, user_id: str, new_mode: Mode | str) -> dict[str, Any]:
        with self._lock:
            self.account(user_id)
            mode = Mode(new_mode)
            now = self.clock.now()
            change = self._apply_mode_switch(user_id, mode, now)
            self._record("mode_switch", now, {
                "user_id": user_id, "old": change.old.value, "new": change.new.value,
            })
            return {
                "user_id": user_id, "old": change.old.value, "new": change.new.value,
                "timestamp": now.isoformat(),
            }

    def _apply_mode_switch(self, user_id: str, mode: Mode, now: datetime):
        change = self.modes.switch(user_id, mode, now)
        event = self.field.timeline.record(now, user_id, "mode_switch", {
            "old": change.old.value, "new": change.new.value,
        })
        self._emit("mode.switch", {
            "user_id": user_id, "old": change.old.value, "new": change.new.value,
            "timeline_event_id": event.id,
        })
        self._emit("timeline.event", event.to_dict())
        return change

    def record_login(self, user_id: str) -> dict[str, Any]:
        """Journal a login as a timeline event so usage metrics (logins per
        day, per user) survive restarts and replays."""
        with self._lock:
            self.account(user_id)
            now = self.clock.now()
            event = self._apply_login(user_id, now)
            self._record("login", now, {"user_id": user_id})
            return event

    def _apply_login(self, user_id: str, now: datetime) -> dict[str, Any]:
        event = self.field.timeline.record(now, user_id, "system", {"what": "login"})
        self._emit("session.login", {
            "user_id": user_id, "timeline_event_id": event.id,
        })
        self._emit("timeline.event", event.to_dict())
        return event.to_dict()

    def post_feedback(self, user_id: str, message: str) -> dict[str, Any]:
        """Contact/report form entry; lands on the shared timeline."""
        if len(message) > 2000:
            raise MessageTooLong(
                f"message is {len(message)} characters; the cap is 2000",
                length=len(message), cap=2000,
            )
        with self._lock:
            self.account(user_id)
            now = self.clock.now()
            event = self._apply_feedback(user_id, message, now)
            self._record("feedback", now, {"user_id": user_id, "message": message})
            return event

    def _apply_feedback(self, user_id: str, message: str,
                        now: datetime) -> dict[str, Any]:
        event = self.field.timeline.record(now, user_id, "system", {
            "what": "feedback", "message": message,
        })
        self._emit("timeline.event", event.to_dict())
        return event.to_dict()

    def post_chat(self, user_id: str, message: str) -> dict[str, Any]:
        if len(message) > 2000:
            raise MessageTooLong(
                f"message is {len(message)} characters; the cap is 2000",
                length=len(message), cap=2000,
            )
        with self._lock:
            self.account(user_id)
            now = self.clock.now()
            msg = self._apply_chat(user_id, message, now)
            self._record("chat", now, {"user_id": user_id, "message": message})
            return msg

    def _apply_chat(self, user_id: str, message: str, now: datetime) -> dict[str, Any]:
        msg = {
            "id": len(self.chat) + 1,
            "user_id": user_id,
            "message": message,
            "timestamp": now.isoformat(),
        }
        self.chat.append(msg)
        self._emit("chat.message", msg)
        return msg

    def spawn_weed(self, plot_id: str, position: Coord2) -> dict[str, Any]:
        with self._lock:
            self.cfg.plot(plot_id)
            now = self.clock.now()
            weed = self._apply_weed_spawn(plot_id, position, now)
            self._record("weed_spawn", now, {
                "plot_id": plot_id, "position": list(position.as_tuple()),
            })
            return weed

    def _apply_weed_spawn(self, plot_id: str, position: Coord2,
                          now: datetime) -> dict[str, Any]:
        weed = self.field.add_weed(plot_id, position, now)
        event = self.field.timeline.record(now, "robot", "system", {
            "what": "weed_appeared", "weed_id": weed.id, "plot_id": plot_id,
            "position": list(position.as_tuple()),
        })
        payload = {
            "weed_id": weed.id, "plot_id": plot_id,
            "position": list(position.as_tuple()),
            "timeline_event_id": event.id,
        }
        self._emit("weed.spawned", payload)
        self._emit("timeline.event", event.to_dict())
        return payload

    # -- daily boundaries ---------------------------------------------------------------

    def _next_boundaries(self) -> list[tuple[datetime, int, int]]:
        plan_day = (self.planner.last_planned_day or 0) + 1
        t_plan = self.epoch + timedelta(days=plan_day - 1, hours=self.cfg.planner_hour)
        tick_day = self._completed_days + 1
        t_tick = self.epoch + timedelta(days=tick_day)
        # at equal timestamps the day tick runs before the next day's planner
        return [(t_tick, 0, tick_day), (t_plan, 1, plan_day)]

    def advance_to(self, target: datetime, drain: bool = True) -> None:
        """Move simulated time forward, firing planner and day-tick
        boundaries in order and (by default) executing queued tasks at each
        boundary."""
        with self._lock:
            if drain:
                self.drain_queue()
            while True:
                t, prio, day = min(self._next_boundaries())
                if t > target:
                    break
                self.clock.advance_to(t)
                if prio == 0:
                    self._fire_day_tick(day, t)
                else:
                    self._fire_planner(day, t)
                if drain:
                    self.drain_queue()
            self.clock.advance_to(target)

    def advance_days(self, days: int, drain: bool = True) -> None:
        self.advance_to(self.clock.now() + timedelta(days=days), drain=drain)

    def catch_up(self) -> None:
        """Fire any boundaries the wall-scaled clock has already crossed."""
        self.advance_to(self.clock.now(), drain=False)

    def _sample_weather(self, at: datetime) -> WeatherSample | None:
        try:
            sample = self.weather.current(at)
            self._last_weather = sample
            return sample
        except WeatherUnavailable:
            return None

    def _fire_planner(self, day: int, at: datetime) -> None:
        sample = self._sample_weather(at)
        effective = sample or WeatherSample(at, False, 0.0, 15.0)
        tasks = self.planner.plan(
            day, at, effective, self.field, self.modes,
            self.gantry.moisture, self.user_plots(), self._make_task_id,
        )
        self._record("planner_run", at, {
            "day": day,
            "weather": sample.to_dict() if sample else None,
            "task_ids": [t.id for t in tasks],
        })
        self._emit("planner.run", {
            "day": day, "task_count": len(tasks),
            "weather": sample.to_dict() if sample else None,
        })
        for task in tasks:
            steps = compile_task(task, self.field, self.cfg)
            estimate = estimate_duration(steps, self.cfg)
            position = self.queue.submit(task, at, estimate)
            self._record("submit", at, {
                "task": task_to_dict(task),
                "enqueued_at": at.isoformat(),
                "estimate_s": estimate,
                "position": position,
                "validation": {"verdict": "ok", "findings": []},
            })
            self._emit("queue.submitted", {
                "task_id": task.id, "user_id": task.user_id, "kind": task.kind_name,
                "position": position, "estimate_s": estimate, "origin": task.origin,
            })

    def _fire_day_tick(self, day: int, at: datetime) -> None:
        sample = self._sample_weather(at) or self._last_weather
        weather_dict = (
            sample.to_dict() if sample
            else WeatherSample(at, False, 0.0, 15.0).to_dict()
        )
        self._record("day_tick", at, {"day": day, "weather": weather_dict})
        self._apply_day_tick(day, at, weather_dict)
        if (self.journal is not None and not self._folding
                and day % self.cfg.checkpoint_every_days == 0):
            self.journal.append("checkpoint", at.isoformat(), self.snapshot_state())

    def _apply_day_tick(self, day: int, at: datetime,
                        weather_dict: dict[str, Any]) -> None:
        raining = bool(weather_dict["raining"])
        self.gantry.moisture.apply_daily_weather(raining)
        changes = self.field.growth_tick(day, self.gantry.moisture, self._noise_fn())
        self.timelapse.capture(day, at, self.field, self.gantry.moisture)
        germinated = [c["plant_id"] for c in changes if c["event"] == "germinated"]
        event = self.field.timeline.record(at, "robot", "system", {
            "what": "day_complete",
            "day": day,
            "raining": raining,
            "germinated": germinated,
            "germination_rate": self.field.germination_rate(),
        })
        self._completed_days = day
        self._emit("day.tick", {
            "day": day,
            "weather": weather_dict,
            "growth": changes,
            "germination_rate": self.field.germination_rate(),
            "plants": [
                {"id": p.id, "state": p.state, "radius_mm": p.current_radius_mm}
                for _, p in sorted(self.field.plants.items())
            ],
            "timeline_event_id": event.id,
        })
        self._emit("timeline.event", event.to_dict())

    # -- views -------------------------------------------------------------------------

    def field_view(self, plot_id: str | None = None) -> dict[str, Any]:
        with self._lock:
            if plot_id is not None:
                self.cfg.plot(plot_id)
            plants = [
                p.to_dict() for _, p in sorted(self.field.plants.items())
                if plot_id is None or p.plot_id == plot_id
            ]
            weeds = [
                {"id": w.id, "plot_id": w.plot_id,
                 "position": list(w.position.as_tuple())}
                for _, w in sorted(self.field.weeds.items())
                if plot_id is None or w.plot_id == plot_id
            ]
            return {
                "sim_time": self.clock.now().isoformat(),
                "day": self.day_index(),
                "completed_days": self._completed_days,
                "plot_id": plot_id,
                "plants": plants,
                "weeds": weeds,
                "germination_rate": self.field.germination_rate(),
                "gantry": self.gantry.state(),
                "moisture_mean": self.gantry.moisture.mean(),
            }

    def weather_view(self) -> dict[str, Any]:
        """Current sample plus forecast window; falls back to the last-known
        sample (flagged stale) when the provider is down."""
        with self._lock:
            now = self.clock.now()
            sample = self._sample_weather(now)
            stale = False
            if sample is None:
                if self._last_weather is None:
                    raise WeatherUnavailable("no weather sample available yet")
                sample = self._last_weather
                stale = True
            try:
                forecast = self.weather.forecast(now)
            except (WeatherUnavailable, AttributeError):
                forecast = []
            return {
                "current": sample.to_dict(),
                "stale": stale,
                "forecast": [s.to_dict() for s in forecast],
            }

    # -- persistence ----------------------------------------------------------------------

    def snapshot_state(self) -> dict[str, Any]:
        return {
            "clock": {"now": self.clock.now().isoformat()},
            "gantry": self.gantry.snapshot(),
            "field": self.field.snapshot(),
            "modes": self.modes.snapshot(),
            "queue": self.queue.snapshot_state(),
            "planner": self.planner.snapshot_state(),
            "timelapse": self.timelapse.snapshot_state(),
            "chat": list(self.chat),
            "task_seq": self._task_seq,
            "completed_days": self._completed_days,
        }

    def _restore_snapshot(self, snap: dict[str, Any]) -> None:
        self.clock.advance_to(datetime.fromisoformat(snap["clock"]["now"]))
        self.gantry.restore(snap["gantry"])
        self.field.restore(snap["field"])
        self.modes.restore(snap["modes"])
        self.queue.restore_state(snap["queue"])
        self.planner.restore_state(snap["planner"])
        self.timelapse.restore_state(snap["timelapse"])
        self.chat = list(snap["chat"])
        self._task_seq = snap["task_seq"]
        self._completed_days = snap["completed_days"]

    def state_digest(self) -> str:
        """Canonical hash of the full structured state, for replay checks."""
        blob = json.dumps(self.snapshot_state(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- fold / restore ----------------------------------------------------------------

    def _apply_record(self, rec: Record) -> None:
        t = datetime.fromisoformat(rec.t)
        d = rec.data
        if rec.type == "checkpoint":
            return
        if rec.type != "exec_end":
            self.clock.advance_to(t)

        if rec.type == "submit":
            task = task_from_dict(d["task"])
            self._bump_task_seq(task.id)
            self.queue.submit(
                task, datetime.fromisoformat(d["enqueued_at"]), d["estimate_s"]
            )
        elif rec.type == "exec_begin":
            entry = self.queue.begin_next(t)
            if entry.task.id != d["task_id"]:
                raise RuntimeError(
                    f"replay divergence: journal executed {d['task_id']}, "
                    f"fold chose {entry.task.id}"
                )
        elif rec.type == "exec_end":
            entry = self.queue.executing_entry()
            if entry is None or entry.task.id != d["task_id"]:
                raise RuntimeError(f"replay divergence at exec_end {d['task_id']}")
            if d["state"] == "failed" and (d["result"] or {}).get("interrupted"):
                now = self.clock.now()
                event = self.field.timeline.record(
                    now, "robot", entry.task.kind_name, {
                        "task_id": entry.task.id,
                        "user_id": entry.task.user_id,
                        "origin": entry.task.origin,
                        "state": "failed",
                        "result": d["result"],
                    })
                self.queue.finish(entry, "failed", d["result"], event.id, now)
            else:
                self._execute_entry(entry)
            self.clock.advance_to(t)
        elif rec.type == "cancel":
            self.queue.cancel(d["task_id"], d["user_id"])
        elif rec.type == "mode_switch":
            self._apply_mode_switch(d["user_id"], Mode(d["new"]), t)
        elif rec.type == "chat":
            self._apply_chat(d["user_id"], d["message"], t)
        elif rec.type == "login":
            self._apply_login(d["user_id"], t)
        elif rec.type == "feedback":
            self._apply_feedback(d["user_id"], d["message"], t)
        elif rec.type == "weed_spawn":
            self._apply_weed_spawn(d["plot_id"], Coord2(*d["position"]), t)
        elif rec.type == "planner_run":
            self.planner.last_planned_day = d["day"]
            if d["weather"]:
                self._last_weather = WeatherSample(
                    datetime.fromisoformat(d["weather"]["timestamp"]),
                    d["weather"]["raining"], d["weather"]["rainfall_mm"],
                    d["weather"]["temperature_c"],
                )
        elif rec.type == "day_tick":
            self._apply_day_tick(d["day"], t, d["weather"])
        else:
            raise RuntimeError(f"unknown journal record type {rec.type!r}")

    @classmethod
    def _blank_from_header(cls, header: dict[str, Any],
                           weather: WeatherProvider | None = None) -> "GardenEngine":
        meta = header["meta"]
        cfg = config_from_dict(meta["config"])
        return cls(
            cfg,
            epoch=datetime.fromisoformat(meta["epoch"]),
            accounts=accounts_from_dicts(meta["accounts"]),
            weather=weather,
            noise_seed=meta.get("noise_seed"),
            noise_sigma=meta.get("noise_sigma") or 0.0,
        )

    @classmethod
    def fold(cls, header: dict[str, Any], records: list[Record],
             weather: WeatherProvider | None = None) -> "GardenEngine":
        """Rebuild state from scratch by replaying records (no checkpoints)."""
        engine = cls._blank_from_header(header, weather)
        engine._folding = True
        for rec in records:
            engine._apply_record(rec)
        engine._folding = False
        return engine

    @classmethod
    def restore(cls, journal_path: str | Path,
                weather: WeatherProvider | None = None,
                strict: bool = False) -> "GardenEngine":
        """Rebuild from the journal: last checkpoint plus replayed tail.

        A corrupt tail is cut back to the last valid record (strict=True
        raises instead); an entry caught mid-execution by the crash is
        re-marked failed with exactly one failure timeline event.
        """
        header, records, corrupt = read_journal(journal_path, recover=True)
        if corrupt is not None and strict:
            raise corrupt
        if not header:
            raise corrupt or RuntimeError("empty journal")

        engine = cls._blank_from_header(header, weather)
        engine._folding = True
        start = 0
        for i in range(len(records) - 1, -1, -1):
            if records[i].type == "checkpoint":
                engine._restore_snapshot(records[i].data)
                start = i + 1
                break
        for rec in records[start:]:
            engine._apply_record(rec)
        engine._folding = False

        if corrupt is not None:
            truncate_to_valid(journal_path, corrupt.details["valid_bytes"])
        engine.journal = JournalWriter(journal_path)

        dangling = engine.queue.executing_entry()
        if dangling is not None:
            now = engine.clock.now()
            result = {
                "error": {"code": 1203, "message": "interrupted by restart"},
                "interrupted": True,
            }
            event = engine.field.timeline.record(
                now, "robot", dangling.task.kind_name, {
                    "task_id": dangling.task.id,
                    "user_id": dangling.task.user_id,
                    "origin": dangling.task.origin,
                    "state": "failed",
                    "result": result,
                })
            engine.queue.finish(dangling, "failed", result, event.id, now)
            engine._record("exec_end", now, {
                "task_id": dangling.task.id, "state": "failed", "result": result,
            })
            engine._emit("queue.failed", {
                "task_id": dangling.task.id, "user_id": dangling.task.user_id,
                "kind": dangling.task.kind_name, "state": "failed",
                "result": result, "timeline_event_id": event.id,
            })
        return engine

    def close(self) -> None:
        if self.journal is not None:
            self.journal.sync()
            self.journal.close()
            self.journal = None
