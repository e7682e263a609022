"""HTTP service: sessions, field views, tasks, queue, timeline, time-lapse,
chat, weather, and a server-sent event stream with resume cursors.

All mutations funnel into the engine's single-writer command path; handlers
here only translate between JSON and domain calls. Every domain error
surfaces as a JSON body with a stable integer ``code`` (see errors module)
under the matching HTTP status.
"""

from __future__ import annotations

import json
import queue as queue_mod
import secrets
import threading
import time
from datetime import datetime
from typing import Any, Callable, Iterator

from fastapi import Depends, FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from .accounts import verify_password
from .engine import GardenEngine
from .errors import (
    GardenError,
    InvalidCredentials,
    NoFrames,
    QueueEmpty,
    RateLimited,
    RobotBusy,
    Unauthenticated,
)
from .policy import Mode
from .snapshots import PERSPECTIVES
from .tasks import kind_from_dict

NowFn = Callable[[], float]


class SessionStore:
    """Bearer-token sessions with TTL expiry and login throttling.

    Wall-clock based (injectable for tests); session lifetime is about the
    human at the browser, not simulated garden time.
    """

    def __init__(self, ttl_s: float, now_fn: NowFn = time.time,
                 rate_limit: int = 5, rate_window_s: float = 60.0) -> None:
        self.ttl_s = ttl_s
        self.now_fn = now_fn
        self.rate_limit = rate_limit
        self.rate_window_s = rate_window_s
        self._sessions: dict[str, dict[str, Any]] = {}
        self._attempts: dict[str, list[float]] = {}
        self._lock = threading.Lock()

    def throttle(self, user_id: str) -> None:
        """Count a login attempt (successful or not) against the window."""
        with self._lock:
            now = self.now_fn()
            window = [t for t in self._attempts.get(user_id, [])
                      if t > now - self.rate_window_s]
            if len(window) >= self.rate_limit:
                raise RateLimited(
                    f"too many login attempts for {user_id!r}; retry later",
                    retry_after_s=self.rate_window_s,
                )
            window.append(now)
            self._attempts[user_id] = window

    def create(self, user_id: str) -> dict[str, Any]:
        with self._lock:
            token = secrets.token_hex(16)
            session = {
                "token": token,
                "user_id": user_id,
                "expires_at": self.now_fn() + self.ttl_s,
            }
            self._sessions[token] = session
            return dict(session)

    def resolve(self, token: str) -> str:
        with self._lock:
            session = self._sessions.get(token)
            if session is None:
                raise Unauthenticated("unknown or expired session token")
            if self.now_fn() >= session["expires_at"]:
                del self._sessions[token]
                raise Unauthenticated("session expired")
            return session["user_id"]

    def drop(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)


def _topic_of(event_type: str) -> str:
    if event_type.startswith("queue."):
        return "queue"
    if event_type == "timeline.event":
        return "timeline"
    if event_type == "chat.message":
        return "chat"
    if event_type.startswith("stream."):
        return "control"
    return "field"


def _sse(ev: dict[str, Any]) -> str:
    body = json.dumps(ev, separators=(",", ":"))
    return f"id: {ev['seq']}\nevent: {ev['type']}\ndata: {body}\n\n"


def _bad_request(message: str) -> GardenError:
    return GardenError(message)


def create_app(engine: GardenEngine, *, now_fn: NowFn = time.time,
               keepalive_s: float = 15.0,
               session_ttl_s: float | None = None) -> FastAPI:
    app = FastAPI(title="gardenbot", docs_url=None, redoc_url=None)
    sessions = SessionStore(
        ttl_s=session_ttl_s if session_ttl_s is not None
        else engine.cfg.session_ttl_s,
        now_fn=now_fn,
    )
    app.state.engine = engine
    app.state.sessions = sessions

    @app.exception_handler(GardenError)
    async def garden_error(_request: Request, exc: GardenError) -> JSONResponse:
        return JSONResponse(status_code=exc.http_status,
                            content={"error": exc.to_payload()})

    def require_user(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise Unauthenticated("missing bearer token")
        return sessions.resolve(header[7:].strip())

    def me_doc(user_id: str) -> dict[str, Any]:
        acct = engine.account(user_id)
        return {
            "user_id": acct.user_id,
            "display_name": acct.display_name,
            "plot_id": acct.plot_id,
            "mode": engine.modes.mode_of(user_id).value,
        }

    # -- sessions --------------------------------------------------------------------

    @app.post("/api/login")
    def login(body: dict[str, Any]) -> dict[str, Any]:
        user_id = str(body.get("user_id", ""))
        password = str(body.get("password", ""))
        sessions.throttle(user_id)
        acct = engine.accounts.get(user_id)
        if acct is None or not verify_password(password, acct.password_hash):
            raise InvalidCredentials("wrong user id or password")
        session = sessions.create(user_id)
        engine.record_login(user_id)
        return {**session, **me_doc(user_id)}

    @app.post("/api/logout")
    def logout(request: Request, user_id: str = Depends(require_user)) -> dict:
        sessions.drop(request.headers["authorization"][7:].strip())
        return {"ok": True, "user_id": user_id}

    @app.get("/api/me")
    def me(user_id: str = Depends(require_user)) -> dict[str, Any]:
        return me_doc(user_id)

    @app.get("/api/users")
    def users(_user_id: str = Depends(require_user)) -> dict[str, Any]:
        return {"users": [me_doc(uid) for uid in sorted(engine.accounts)]}

    # -- field views -----------------------------------------------------------------

    def snapshot_refs(style: str) -> dict[str, Any]:
        try:
            latest = engine.timelapse.frames()[-1]
        except NoFrames:
            return {"style": style, "day": None, "refs": []}
        if style == "photo_grid":
            refs = [
                f"/api/timelapse/{latest.day_index}/topdown?plot_id={p.plot_id}"
                for p in engine.cfg.plots()
            ]
        else:
            refs = [f"/api/timelapse/{latest.day_index}/topdown"]
        return {"style": style, "day": latest.day_index, "refs": refs}

    @app.get("/api/field")
    def field(scope: str = "global", plot_id: str | None = None,
              style: str = "abstract",
              _user_id: str = Depends(require_user)) -> dict[str, Any]:
        if style not in ("abstract", "photo_grid"):
            raise _bad_request(f"unknown style {style!r}")
        if scope == "plot":
            if plot_id is None:
                raise _bad_request("scope=plot requires plot_id")
            view = engine.field_view(plot_id)
        elif scope == "global":
            view = engine.field_view(None)
        else:
            raise _bad_request(f"unknown scope {scope!r}")
        owners = {a.plot_id: uid for uid, a in engine.accounts.items()}
        plots = [
            {
                "plot_id": p.plot_id,
                "origin": [p.origin.x_mm, p.origin.y_mm],
                "size_mm": p.size_mm,
                "owner": owners.get(p.plot_id),
            }
            for p in engine.cfg.plots()
            if plot_id is None or p.plot_id == plot_id
        ]
        moisture = engine.gantry.moisture
        return {
            **view,
            "plots": plots,
            "snapshot": snapshot_refs(style),
            "moisture": {
                "cell_mm": engine.cfg.moisture.cell_size_mm,
                "grid": moisture.snapshot(),
                "mean": moisture.mean(),
            },
        }

    # -- tasks and queue ----------------------------------------------------------------

    @app.post("/api/tasks")
    def submit_task(body: dict[str, Any],
                    user_id: str = Depends(require_user)) -> dict[str, Any]:
        try:
            kind = kind_from_dict(body)
        except (KeyError, ValueError, TypeError) as exc:
            raise _bad_request(f"malformed task body: {exc}") from exc
        return engine.submit_task(user_id, kind)

    @app.get("/api/queue")
    def queue_view(_user_id: str = Depends(require_user)) -> dict[str, Any]:
        return {"entries": engine.queue.snapshot()}

    @app.get("/api/tasks/{task_id}")
    def task_view(task_id: str,
                  _user_id: str = Depends(require_user)) -> dict[str, Any]:
        return engine.queue.entry(task_id).to_dict()

    @app.delete("/api/tasks/{task_id}")
    def cancel_task(task_id: str,
                    user_id: str = Depends(require_user)) -> dict[str, Any]:
        return engine.cancel_task(user_id, task_id)

    # -- mode ------------------------------------------------------------------------------

    @app.post("/api/mode")
    def switch_mode(body: dict[str, Any],
                    user_id: str = Depends(require_user)) -> dict[str, Any]:
        raw = body.get("mode")
        try:
            mode = Mode(raw)
        except ValueError as exc:
            raise _bad_request(f"unknown mode {raw!r}") from exc
        return engine.switch_mode(user_id, mode)

    # -- timeline, chat, feedback ------------------------------------------------------------

    @app.get("/api/timeline")
    def timeline(actor: str | None = None, plot_id: str | None = None,
                 kind: str | None = None, since: str | None = None,
                 until: str | None = None, after_id: int = 0, limit: int = 100,
                 _user_id: str = Depends(require_user)) -> dict[str, Any]:
        events = engine.field.timeline.query(
            actor=actor, plot_id=plot_id, kind=kind,
            since=datetime.fromisoformat(since) if since else None,
            until=datetime.fromisoformat(until) if until else None,
            after_id=after_id, limit=limit,
        )
        return {"events": [e.to_dict() for e in events]}

    @app.get("/api/chat")
    def chat_history(after_id: int = 0, limit: int = 100,
                     _user_id: str = Depends(require_user)) -> dict[str, Any]:
        msgs = [m for m in engine.chat if m["id"] > after_id][:limit]
        return {"messages": msgs}

    @app.post("/api/chat")
    def chat_post(body: dict[str, Any],
                  user_id: str = Depends(require_user)) -> dict[str, Any]:
        return engine.post_chat(user_id, str(body.get("message", "")))

    @app.post("/api/feedback")
    def feedback(body: dict[str, Any],
                 user_id: str = Depends(require_user)) -> dict[str, Any]:
        return engine.post_feedback(user_id, str(body.get("message", "")))

    # -- weather -------------------------------------------------------------------------

    @app.get("/api/weather")
    def weather(_user_id: str = Depends(require_user)) -> dict[str, Any]:
        return engine.weather_view()

    # -- time-lapse ------------------------------------------------------------------------

    @app.get("/api/timelapse")
    def timelapse_index(_user_id: str = Depends(require_user)) -> dict[str, Any]:
        try:
            frames = engine.timelapse.frames()
        except NoFrames:
            frames = []
        return {
            "perspectives": list(PERSPECTIVES),
            "days": [
                {"day": f.day_index, "captured_at": f.captured_at.isoformat()}
                for f in frames
            ],
        }

    @app.get("/api/timelapse/{day}/{perspective}")
    def timelapse_frame(day: int, perspective: str, plot_id: str | None = None,
                        _user_id: str = Depends(require_user)) -> Response:
        if perspective not in PERSPECTIVES:
            raise _bad_request(f"unknown perspective {perspective!r}")
        if plot_id is not None:
            engine.cfg.plot(plot_id)
        record = next(
            (f for f in engine.timelapse.frames() if f.day_index == day), None
        )
        if record is None:
            raise NoFrames(f"no frame captured for day {day}")
        png = engine.timelapse.render(record, perspective, plot_id)
        return Response(content=png, media_type="image/png")

    # -- live stream ------------------------------------------------------------------------

    @app.get("/api/stream")
    def stream(request: Request, topics: str | None = None,
               cursor: int | None = None, once: bool = False,
               _user_id: str = Depends(require_user)) -> StreamingResponse:
        wanted = set(t.strip() for t in topics.split(",")) if topics else None
        after = cursor
        if after is None:
            last_id = request.headers.get("last-event-id")
            if last_id and last_id.isdigit():
                after = int(last_id)

        def passes(ev: dict[str, Any]) -> bool:
            topic = _topic_of(ev["type"])
            return topic == "control" or wanted is None or topic in wanted

        def gen() -> Iterator[str]:
            sid, q, backlog = engine.bus.subscribe(after)
            try:
                yield "retry: 3000\n\n"
                for ev in backlog:
                    if passes(ev):
                        yield _sse(ev)
                if once:
                    # catch-up mode: replay the backlog and close
                    return
                while True:
                    try:
                        ev = q.get(timeout=keepalive_s)
                    except queue_mod.Empty:
                        yield ": keepalive\n\n"
                        continue
                    if ev["type"] == "stream.slow_consumer":
                        yield _sse(ev)
                        return
                    if passes(ev):
                        yield _sse(ev)
            finally:
                engine.bus.unsubscribe(sid)

        return StreamingResponse(gen(), media_type="text/event-stream", headers={
            "cache-control": "no-cache",
            "x-accel-buffering": "no",
        })

    return app


class EngineRunner(threading.Thread):
    """Background loop for live serving: fires elapsed boundaries of the
    wall-scaled clock and executes queued tasks."""

    def __init__(self, engine: GardenEngine, poll_s: float = 0.05) -> None:
        super().__init__(daemon=True)
        self.engine = engine
        self.poll_s = poll_s
        self._stop = threading.Event()

    def run(self) -> None:
        while not self._stop.is_set():
            self.engine.catch_up()
            try:
                self.engine.run_next_task()
            except (QueueEmpty, RobotBusy):
                self._stop.wait(self.poll_s)

    def stop(self) -> None:
        self._stop.set()
        self.join(timeout=5)
