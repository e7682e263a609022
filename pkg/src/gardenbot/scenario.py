"""Scripted multi-week campaign runner.

A scenario script is a YAML document describing users (mode schedules and
day-by-day action templates), a weather source, and optional stochastic
settings. Running one drives the full stack in virtual time, day by day:
planner batch, user submissions, execution, growth tick, daily frame. The
output is a metrics report that is byte-identical for the same script and
seed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field as dc_field, replace as dc_replace
from datetime import timedelta
from pathlib import Path
from typing import Any

import yaml

from .accounts import default_accounts
from .clock import DEFAULT_EPOCH
from .config import GardenConfig, config_from_dict
from .coords import Coord2
from .engine import GardenEngine
from .errors import (
    DuplicateWithinDebounce,
    GardenError,
    PlacementExhausted,
    QueueFull,
    ScriptInvalid,
    TaskRejected,
)
from .policy import Mode, mode_day_matrix
from .tasks import MoistureRead, Scan, Sow, TaskKind, Water, Weed
from .weather import StubProvider, TraceProvider, WeatherProvider

_LINE_KEY = "__line__"

MODE_LETTERS = {"manual": "M", "hybrid": "H", "automated": "A"}

_ACTIONS = {"sow", "water_all", "weed", "scan", "moisture_read",
            "chat", "feedback", "login"}


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that stamps each mapping with its 1-based source line."""


def _construct_mapping(loader: _LineLoader, node: yaml.Node,
                       deep: bool = False) -> dict:
    mapping = yaml.SafeLoader.construct_mapping(loader, node, deep=deep)
    mapping[_LINE_KEY] = node.start_mark.line + 1
    return mapping


_LineLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping
)


def load_script(path: str | Path) -> tuple[dict[str, Any], Path]:
    """Parse a script file; returns (document, base directory)."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScriptInvalid(f"cannot read script: {exc}") from exc
    try:
        doc = yaml.load(io.StringIO(text), Loader=_LineLoader)
    except yaml.YAMLError as exc:
        raise ScriptInvalid(f"not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScriptInvalid("script root must be a mapping")
    return doc, p.parent


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def _line(node: Any, fallback: int = 1) -> int:
    if isinstance(node, dict):
        return node.get(_LINE_KEY, fallback)
    return fallback


def _strip_lines(node: Any) -> Any:
    if isinstance(node, dict):
        return {k: _strip_lines(v) for k, v in node.items() if k != _LINE_KEY}
    if isinstance(node, list):
        return [_strip_lines(v) for v in node]
    return node


def _build_config(doc: dict[str, Any]) -> GardenConfig:
    overrides = dict(_strip_lines(doc.get("config") or {}))
    if doc.get("viability_threshold") is not None:
        overrides["viability_threshold"] = float(doc["viability_threshold"])
    return config_from_dict(overrides)


def validate_script(doc: dict[str, Any], base_dir: Path) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    root_line = _line(doc)

    def err(node: Any, message: str) -> None:
        diags.append(Diagnostic(_line(node, root_line), message))

    duration = doc.get("duration_days")
    if not isinstance(duration, int) or duration < 0:
        err(doc, f"duration_days must be a non-negative integer, got {duration!r}")
        duration = 0

    accel = doc.get("time_acceleration", 10000)
    if not isinstance(accel, (int, float)) or accel <= 0:
        err(doc, f"time_acceleration must be positive, got {accel!r}")

    sigma = doc.get("noise_sigma", 0)
    if not isinstance(sigma, (int, float)) or sigma < 0:
        err(doc, f"noise_sigma must be >= 0, got {sigma!r}")

    vt = doc.get("viability_threshold")
    if vt is not None and not (isinstance(vt, (int, float)) and 0 <= vt <= 1):
        err(doc, f"viability_threshold must be in [0, 1], got {vt!r}")

    try:
        cfg = _build_config(doc)
    except Exception as exc:
        err(doc.get("config") or doc, f"bad config overrides: {exc}")
        cfg = config_from_dict({})

    accounts = default_accounts(iterations=1)
    plot_ids = {p.plot_id for p in cfg.field.plots()}

    weather = doc.get("weather") or {}
    if weather:
        trace = weather.get("trace")
        rain_days = weather.get("rain_days")
        if trace is not None and rain_days is not None:
            err(weather, "weather takes either trace or rain_days, not both")
        if trace is not None and not (base_dir / str(trace)).is_file():
            err(weather, f"weather trace file not found: {trace}")
        if rain_days is not None:
            if not isinstance(rain_days, list) or any(
                not isinstance(d, int) or d < 1 for d in rain_days
            ):
                err(weather, "rain_days must be a list of day indices >= 1")
        outages = weather.get("outage_days")
        if outages is not None and (
            not isinstance(outages, list)
            or any(not isinstance(d, int) or d < 1 for d in outages)
        ):
            err(weather, "outage_days must be a list of day indices >= 1")

    users = doc.get("users")
    if users is None:
        users = []
    if not isinstance(users, list):
        err(doc, "users must be a list")
        users = []

    seen_users: set[str] = set()
    for user in users:
        if not isinstance(user, dict):
            err(users if isinstance(users, dict) else doc, "user entry must be a mapping")
            continue
        uid = user.get("user_id")
        if uid not in accounts:
            err(user, f"unknown user_id {uid!r}")
            continue
        if uid in seen_users:
            err(user, f"duplicate user_id {uid!r}")
            continue
        seen_users.add(uid)
        plot = cfg.plot(accounts[uid].plot_id)

        schedule = user.get("mode_schedule") or []
        if not isinstance(schedule, list) or not schedule:
            err(user, f"user {uid}: mode_schedule is required")
            schedule = []
        expected_from = 1
        for span in schedule:
            if not isinstance(span, dict):
                err(user, f"user {uid}: mode_schedule entry must be a mapping")
                continue
            frm, to = span.get("from_day"), span.get("to_day")
            mode = span.get("mode")
            if mode not in ("manual", "hybrid", "automated"):
                err(span, f"user {uid}: unknown mode {mode!r}")
            if not (isinstance(frm, int) and isinstance(to, int) and frm <= to):
                err(span, f"user {uid}: bad span from_day={frm!r} to_day={to!r}")
                continue
            if frm != expected_from:
                if frm < expected_from:
                    err(span, f"user {uid}: mode schedule overlaps at day {frm}")
                else:
                    err(span, f"user {uid}: mode schedule gap before day {frm}")
            expected_from = to + 1
        if duration and schedule and expected_from != duration + 1:
            err(user, f"user {uid}: mode schedule covers days 1..{expected_from - 1}, "
                      f"script lasts {duration} days")

        for act in user.get("actions") or []:
            if not isinstance(act, dict):
                err(user, f"user {uid}: action must be a mapping")
                continue
            day = act.get("day")
            if not isinstance(day, int) or not (1 <= day <= max(duration, 1)):
                err(act, f"user {uid}: action day {day!r} outside 1..{duration}")
            do = act.get("do")
            if do not in _ACTIONS:
                err(act, f"user {uid}: unknown action {do!r}")
                continue
            if do == "sow":
                species = act.get("species")
                try:
                    cfg.species_spec(str(species))
                except GardenError:
                    err(act, f"user {uid}: unknown species id {species!r}")
                count = act.get("count", 1)
                if not isinstance(count, int) or count < 1:
                    err(act, f"user {uid}: sow count must be >= 1, got {count!r}")
            if do in ("weed", "moisture_read"):
                target = act.get("target")
                if (not isinstance(target, list) or len(target) != 2
                        or not all(isinstance(v, (int, float)) for v in target)):
                    err(act, f"user {uid}: {do} target must be [x, y]")
                elif not (0 <= target[0] <= plot.size_mm
                          and 0 <= target[1] <= plot.size_mm):
                    err(act, f"user {uid}: {do} target {target} outside the "
                             f"{plot.size_mm} mm plot")
            if do in ("chat", "feedback"):
                msg = act.get("message")
                if not isinstance(msg, str):
                    err(act, f"user {uid}: {do} needs a message string")
                elif do == "chat" and len(msg) > 2000:
                    err(act, f"user {uid}: chat message exceeds 2000 characters")

    for ev in doc.get("events") or []:
        if not isinstance(ev, dict):
            err(doc, "event entry must be a mapping")
            continue
        day = ev.get("day")
        if not isinstance(day, int) or not (1 <= day <= max(duration, 1)):
            err(ev, f"event day {day!r} outside 1..{duration}")
        spawn = ev.get("spawn_weed")
        if not isinstance(spawn, dict):
            err(ev, "event must carry spawn_weed")
            continue
        plot_id = spawn.get("plot")
        if plot_id not in plot_ids:
            err(spawn, f"unknown plot {plot_id!r}")
            continue
        target = spawn.get("target")
        size = cfg.plot(plot_id).size_mm
        if (not isinstance(target, list) or len(target) != 2
                or not all(isinstance(v, (int, float)) for v in target)):
            err(spawn, "spawn_weed target must be [x, y]")
        elif not (0 <= target[0] <= size and 0 <= target[1] <= size):
            err(spawn, f"spawn_weed target {target} outside the {size} mm plot")

    return sorted(diags, key=lambda d: (d.line, d.message))


# -- metrics -------------------------------------------------------------------------


@dataclass
class MetricsReport:
    scenario: str
    duration_days: int
    seed: str | None
    germination_rate: float
    plants_sown: int
    plants_germinated: int
    plants_live: int
    frames: int
    tasks_by_kind_and_mode: dict[str, dict[str, int]]
    tasks_by_state: dict[str, int]
    rejections: dict[str, int]
    queue_wait_stats: dict[str, float]
    mode_day_matrix: dict[str, str]
    per_plot_plants: dict[str, dict[str, int]]
    logins: int
    logins_by_day: list[int] = dc_field(default_factory=list)
    chat_messages: int = 0
    final_moisture_mean: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "duration_days": self.duration_days,
            "seed": self.seed,
            "germination_rate": self.germination_rate,
            "plants_sown": self.plants_sown,
            "plants_germinated": self.plants_germinated,
            "plants_live": self.plants_live,
            "frames": self.frames,
            "tasks_by_kind_and_mode": self.tasks_by_kind_and_mode,
            "tasks_by_state": self.tasks_by_state,
            "rejections": self.rejections,
            "queue_wait_stats": self.queue_wait_stats,
            "mode_day_matrix": self.mode_day_matrix,
            "per_plot_plants": self.per_plot_plants,
            "logins": self.logins,
            "logins_by_day": self.logins_by_day,
            "chat_messages": self.chat_messages,
            "final_moisture_mean": self.final_moisture_mean,
        }

    def to_text(self) -> str:
        out: list[str] = []
        w = out.append
        w(f"scenario: {self.scenario}")
        w(f"duration_days: {self.duration_days}")
        w(f"seed: {self.seed if self.seed is not None else '-'}")
        w(f"plants_sown: {self.plants_sown}")
        w(f"plants_germinated: {self.plants_germinated}")
        w(f"plants_live: {self.plants_live}")
        w(f"germination_rate: {self.germination_rate:.9f}")
        w(f"frames: {self.frames}")
        w(f"logins: {self.logins}")
        w(f"chat_messages: {self.chat_messages}")
        w(f"final_moisture_mean: {self.final_moisture_mean:.9f}")
        w("")
        w("tasks by kind and mode:")
        modes = ["manual", "hybrid", "automated", "auto_planner"]
        header = f"  {'kind':<14}" + "".join(f"{m:>14}" for m in modes) + f"{'total':>10}"
        w(header)
        for kind in sorted(self.tasks_by_kind_and_mode):
            row = self.tasks_by_kind_and_mode[kind]
            total = sum(row.values())
            w(f"  {kind:<14}"
              + "".join(f"{row.get(m, 0):>14}" for m in modes)
              + f"{total:>10}")
        w("")
        w("tasks by state:")
        for state in sorted(self.tasks_by_state):
            w(f"  {state:<12}{self.tasks_by_state[state]:>8}")
        if self.rejections:
            w("")
            w("rejections by rule:")
            for rule in sorted(self.rejections):
                w(f"  {rule:<12}{self.rejections[rule]:>8}")
        w("")
        w("queue waits: count={count:.0f} mean_s={mean_s:.3f} max_s={max_s:.3f}".format(
            **self.queue_wait_stats))
        w("")
        w("mode-day matrix (M=manual H=hybrid A=automated):")
        for uid in sorted(self.mode_day_matrix):
            w(f"  {uid}: {self.mode_day_matrix[uid]}")
        w("")
        w("per-plot plants (sown/live):")
        for plot_id in sorted(self.per_plot_plants):
            row = self.per_plot_plants[plot_id]
            w(f"  {plot_id}: {row['sown']:>3} / {row['live']:>3}")
        if self.logins_by_day:
            w("")
            w("logins by day: " + " ".join(str(n) for n in self.logins_by_day))
        w("")
        return "\n".join(out)


# -- runner ---------------------------------------------------------------------------


def _weather_provider(doc: dict[str, Any], base_dir: Path,
                      epoch) -> WeatherProvider:
    weather = _strip_lines(doc.get("weather") or {})
    if weather.get("trace"):
        return TraceProvider.from_path(base_dir / weather["trace"])
    return StubProvider(
        epoch,
        rain_days=set(weather.get("rain_days") or ()),
        outage_days=set(weather.get("outage_days") or ()),
    )


class ScenarioRun:
    """One scripted campaign bound to an engine.

    By default a fresh engine is built from the script; passing `engine`
    adopts an existing one instead (e.g. restored from a journal), so a run
    interrupted partway can resume with `run_day` for the remaining days.
    """

    def __init__(self, doc: dict[str, Any], base_dir: Path, *,
                 seed: int | str | None = None,
                 journal_path: str | Path | None = None,
                 engine: GardenEngine | None = None) -> None:
        diags = validate_script(doc, base_dir)
        if diags:
            raise ScriptInvalid(
                f"script has {len(diags)} problem(s)",
                diagnostics=[str(d) for d in diags],
            )
        self.doc = _strip_lines(doc)
        self.name = str(self.doc.get("name") or "scenario")
        self.duration = int(self.doc["duration_days"])
        eff_seed = seed if seed is not None else self.doc.get("seed")
        self.seed = str(eff_seed) if eff_seed is not None else None
        sigma = float(self.doc.get("noise_sigma") or 0.0)

        if engine is not None:
            self.engine = engine
        else:
            cfg = _build_config(doc)
            accounts = default_accounts()
            for user in self.doc.get("users") or []:
                first = user["mode_schedule"][0]
                accounts[user["user_id"]] = dc_replace(
                    accounts[user["user_id"]], initial_mode=Mode(first["mode"])
                )
            self.engine = GardenEngine(
                cfg,
                epoch=DEFAULT_EPOCH,
                accounts=accounts,
                weather=_weather_provider(self.doc, base_dir, DEFAULT_EPOCH),
                noise_seed=self.seed if sigma > 0 else None,
                noise_sigma=sigma,
                journal_path=journal_path,
            )
        self._submitted: dict[str, dict[str, int]] = {}
        self._rejections: dict[str, int] = {}

    # -- single actions -------------------------------------------------------------

    def _count_submit(self, kind: str, mode_label: str) -> None:
        row = self._submitted.setdefault(kind, {})
        row[mode_label] = row.get(mode_label, 0) + 1

    def _submit(self, user_id: str, kind: TaskKind, kind_name: str) -> None:
        mode_label = self.engine.modes.mode_of(user_id).value
        try:
            self.engine.submit_task(user_id, kind)
        except TaskRejected as exc:
            for finding in exc.details.get("findings", [{"rule_id": "?"}]):
                rule = finding.get("rule_id", "?")
                self._rejections[rule] = self._rejections.get(rule, 0) + 1
            return
        except (DuplicateWithinDebounce, QueueFull, PlacementExhausted) as exc:
            name = type(exc).__name__
            self._rejections[name] = self._rejections.get(name, 0) + 1
            return
        self._count_submit(kind_name, mode_label)

    def _perform(self, user_id: str, act: dict[str, Any]) -> None:
        do = act["do"]
        plot = self.engine.cfg.plot(self.engine.accounts[user_id].plot_id)

        def absolute(rel: list[float]) -> Coord2:
            return Coord2(plot.origin.x_mm + float(rel[0]),
                          plot.origin.y_mm + float(rel[1]))

        if do == "login":
            self.engine.record_login(user_id)
        elif do == "sow":
            for _ in range(int(act.get("count", 1))):
                self._submit(user_id, Sow(str(act["species"]), None), "sow")
                self.engine.clock.advance(1.0)
        elif do == "water_all":
            self._submit(user_id, Water(all_in_plot=plot.plot_id), "water")
        elif do == "weed":
            self._submit(user_id, Weed(absolute(act["target"])), "weed")
        elif do == "scan":
            scope = act.get("scope", "plot")
            self._submit(
                user_id,
                Scan(None if scope == "global" else plot.plot_id),
                "scan",
            )
        elif do == "moisture_read":
            self._submit(user_id, MoistureRead(absolute(act["target"])),
                         "moisture_read")
        elif do == "chat":
            self.engine.post_chat(user_id, str(act["message"]))
        elif do == "feedback":
            self.engine.post_feedback(user_id, str(act["message"]))

    # -- the day loop ----------------------------------------------------------------

    def run_day(self, day: int) -> None:
        engine = self.engine
        epoch = engine.epoch
        users = self.doc.get("users") or []
        events = self.doc.get("events") or []
        start = epoch + timedelta(days=day - 1)

        # 05:00 — apply scheduled mode changes before the planner looks
        engine.advance_to(start + timedelta(hours=5))
        for user in users:
            for span in user["mode_schedule"]:
                if span["from_day"] == day and day > 1:
                    engine.switch_mode(user["user_id"], Mode(span["mode"]))

        # 06:00 planner fires inside this advance; 08:00 ambient events
        engine.advance_to(start + timedelta(hours=8))
        for ev in events:
            if ev["day"] == day:
                spawn = ev["spawn_weed"]
                plot = engine.cfg.plot(spawn["plot"])
                target = Coord2(
                    plot.origin.x_mm + float(spawn["target"][0]),
                    plot.origin.y_mm + float(spawn["target"][1]),
                )
                engine.spawn_weed(spawn["plot"], target)

        # 09:00 — user activity, one user at a time
        engine.advance_to(start + timedelta(hours=9))
        for user in users:
            acts = [a for a in user.get("actions") or [] if a["day"] == day]
            if not acts:
                continue
            engine.record_login(user["user_id"])
            for act in acts:
                self._perform(user["user_id"], act)
                engine.clock.advance(1.0)
            engine.drain_queue()

        # midnight — growth tick and the daily frame
        engine.advance_to(start + timedelta(days=1))

    def run(self, first_day: int = 1) -> MetricsReport:
        for day in range(first_day, self.duration + 1):
            self.run_day(day)
        return self._report()

    # -- report assembly ---------------------------------------------------------------

    def _report(self) -> MetricsReport:
        engine = self.engine
        field = engine.field

        for entry in engine.queue.entries.values():
            if entry.task.origin == "auto_planner":
                self._count_submit(entry.task.kind_name, "auto_planner")

        by_state: dict[str, int] = {}
        waits: list[float] = []
        for entry in engine.queue.entries.values():
            by_state[entry.state] = by_state.get(entry.state, 0) + 1
            if entry.started_at is not None:
                waits.append((entry.started_at - entry.enqueued_at).total_seconds())
        wait_stats = {
            "count": float(len(waits)),
            "mean_s": sum(waits) / len(waits) if waits else 0.0,
            "max_s": max(waits) if waits else 0.0,
        }

        initial_modes = {
            uid: Mode(acct.initial_mode) for uid, acct in engine.accounts.items()
        }
        matrix_raw = mode_day_matrix(
            initial_modes, engine.modes.log, engine.epoch, self.duration
        )
        matrix = {
            uid: "".join(MODE_LETTERS[m.value] for m in days)
            for uid, days in matrix_raw.items()
        }

        per_plot: dict[str, dict[str, int]] = {
            p.plot_id: {"sown": 0, "live": 0} for p in engine.cfg.plots()
        }
        germinated = 0
        live = 0
        for plant in field.plants.values():
            per_plot[plant.plot_id]["sown"] += 1
            if plant.live:
                per_plot[plant.plot_id]["live"] += 1
                live += 1
            if plant.germinated_on_day is not None:
                germinated += 1

        login_events = [
            ev for ev in field.timeline.events
            if ev.kind == "system" and ev.payload.get("what") == "login"
        ]
        logins_by_day = [0] * self.duration
        for ev in login_events:
            d = (ev.timestamp - engine.epoch).days
            if 0 <= d < self.duration:
                logins_by_day[d] += 1

        return MetricsReport(
            scenario=self.name,
            duration_days=self.duration,
            seed=self.seed,
            germination_rate=field.germination_rate(),
            plants_sown=len(field.plants),
            plants_germinated=germinated,
            plants_live=live,
            frames=len(engine.timelapse.records),
            tasks_by_kind_and_mode={
                k: dict(sorted(v.items())) for k, v in sorted(self._submitted.items())
            },
            tasks_by_state=dict(sorted(by_state.items())),
            rejections=dict(sorted(self._rejections.items())),
            queue_wait_stats=wait_stats,
            mode_day_matrix=matrix,
            per_plot_plants=per_plot,
            logins=len(login_events),
            logins_by_day=logins_by_day,
            chat_messages=len(engine.chat),
            final_moisture_mean=engine.gantry.moisture.mean(),
        )


def run_scenario(path: str | Path, *, seed: int | str | None = None,
                 journal_path: str | Path | None = None) -> MetricsReport:
    doc, base_dir = load_script(path)
    return ScenarioRun(doc, base_dir, seed=seed, journal_path=journal_path).run()
