"""HTTP layer: sessions, endpoint contracts, error codes, and the SSE stream."""

from __future__ import annotations

import json
from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from gardenbot.api import SessionStore, create_app
from gardenbot.clock import DEFAULT_EPOCH
from gardenbot.coords import Coord2
from gardenbot.errors import RateLimited, Unauthenticated
from gardenbot.tasks import Sow
from gardenbot.weather import StubProvider

EPOCH = DEFAULT_EPOCH


class FakeTime:
    def __init__(self, t: float = 1000.0) -> None:
        self.t = t

    def __call__(self) -> float:
        return self.t


@pytest.fixture
def webapp(engine):
    now = FakeTime()
    app = create_app(engine, now_fn=now, keepalive_s=0.05, session_ttl_s=3600.0)
    client = TestClient(app)
    client.fake_time = now
    return client


def login(client, user="p01", password=None) -> dict:
    res = client.post("/api/login", json={
        "user_id": user, "password": password or f"pw-{user}",
    })
    assert res.status_code == 200, res.text
    return res.json()


def auth(session) -> dict:
    return {"Authorization": f"Bearer {session['token']}"}


# -- sessions ----------------------------------------------------------------------


def test_login_returns_session_and_profile(webapp):
    doc = login(webapp)
    assert doc["user_id"] == "p01"
    assert doc["plot_id"] == "plot-01"
    assert doc["mode"] == "manual"
    assert len(doc["token"]) == 32
    me = webapp.get("/api/me", headers=auth(doc)).json()
    assert me == {"user_id": "p01", "display_name": doc["display_name"],
                  "plot_id": "plot-01", "mode": "manual"}


def test_login_wrong_password_401(webapp):
    res = webapp.post("/api/login", json={"user_id": "p01", "password": "nope"})
    assert res.status_code == 401
    assert res.json()["error"]["code"] == 1501


def test_login_unknown_user_401(webapp):
    res = webapp.post("/api/login", json={"user_id": "zz", "password": "pw"})
    assert res.status_code == 401


def test_login_rate_limited_after_five_attempts(webapp):
    for _ in range(5):
        webapp.post("/api/login", json={"user_id": "p01", "password": "bad"})
    res = webapp.post("/api/login", json={"user_id": "p01", "password": "pw-p01"})
    assert res.status_code == 429
    assert res.json()["error"]["code"] == 1502
    # another user is unaffected
    login(webapp, "p02")
    # the window slides with wall time
    webapp.fake_time.t += 61.0
    login(webapp)


def test_session_expiry(webapp):
    doc = login(webapp)
    webapp.fake_time.t += 3601.0
    res = webapp.get("/api/me", headers=auth(doc))
    assert res.status_code == 401
    assert res.json()["error"]["code"] == 1503


def test_logout_drops_session(webapp):
    doc = login(webapp)
    assert webapp.post("/api/logout", headers=auth(doc)).json()["ok"] is True
    assert webapp.get("/api/me", headers=auth(doc)).status_code == 401


def test_missing_token_401(webapp):
    assert webapp.get("/api/queue").status_code == 401
    res = webapp.get("/api/queue", headers={"Authorization": "Bearer bogus"})
    assert res.status_code == 401


def test_users_roster(webapp):
    doc = login(webapp)
    users = webapp.get("/api/users", headers=auth(doc)).json()["users"]
    assert [u["user_id"] for u in users] == [f"p{i:02d}" for i in range(1, 19)]
    modes = [u["mode"] for u in users]
    assert modes.count("automated") == 5
    assert modes.count("manual") == 3
    assert modes.count("hybrid") == 10


def test_session_store_throttle_counts_every_attempt():
    now = FakeTime()
    store = SessionStore(ttl_s=60, now_fn=now)
    for _ in range(5):
        store.throttle("u")
    with pytest.raises(RateLimited):
        store.throttle("u")
    with pytest.raises(Unauthenticated):
        store.resolve("nope")


# -- tasks over http ------------------------------------------------------------------


def test_submit_sow_task(webapp, engine):
    doc = login(webapp)
    res = webapp.post("/api/tasks", headers=auth(doc), json={
        "kind": "sow", "species": "radish", "target": [450, 450],
    })
    assert res.status_code == 200
    body = res.json()
    assert body["task_id"] == "t-000001"
    assert body["verdict"] == "ok"
    assert body["resolved_target"] == [450, 450]
    engine.drain_queue()
    got = webapp.get(f"/api/tasks/{body['task_id']}", headers=auth(doc)).json()
    assert got["state"] == "done"
    assert got["result"]["plant_id"] == "plant-0001"


def test_submit_malformed_task_400(webapp):
    doc = login(webapp)
    res = webapp.post("/api/tasks", headers=auth(doc), json={"kind": "prune"})
    assert res.status_code == 400
    assert "malformed task body" in res.json()["error"]["message"]


def test_submit_rejected_task_409_with_findings(webapp, engine):
    doc = login(webapp, "p02")
    webapp.post("/api/tasks", headers=auth(doc), json={
        "kind": "sow", "species": "radish", "target": [1450, 450],
    })
    engine.drain_queue()
    res = webapp.post("/api/tasks", headers=auth(doc), json={
        "kind": "sow", "species": "radish", "target": [1455, 455],
    })
    assert res.status_code == 409
    err = res.json()["error"]
    assert err["code"] == 1304
    assert err["details"]["findings"][0]["rule_id"] == "R1"


def test_cross_plot_task_403(webapp):
    doc = login(webapp)  # p01 owns plot-01
    res = webapp.post("/api/tasks", headers=auth(doc), json={
        "kind": "sow", "species": "radish", "target": [1450, 450],
    })
    assert res.status_code == 403
    assert res.json()["error"]["code"] == 1301


def test_queue_view_and_cancel(webapp, engine):
    doc = login(webapp)
    webapp.post("/api/tasks", headers=auth(doc), json={
        "kind": "sow", "species": "radish", "target": [300, 300]})
    second = webapp.post("/api/tasks", headers=auth(doc), json={
        "kind": "sow", "species": "radish", "target": [700, 700]}).json()
    entries = webapp.get("/api/queue", headers=auth(doc)).json()["entries"]
    assert [e["task_id"] for e in entries] == ["t-000001", "t-000002"]
    res = webapp.delete(f"/api/tasks/{second['task_id']}", headers=auth(doc))
    assert res.json()["state"] == "cancelled"
    missing = webapp.delete("/api/tasks/t-009999", headers=auth(doc))
    assert missing.status_code == 404
    assert missing.json()["error"]["code"] == 1205
    engine.drain_queue()
    done = webapp.delete("/api/tasks/t-000001", headers=auth(doc))
    assert done.status_code == 409
    assert done.json()["error"]["code"] == 1206


def test_mode_switch_endpoint(webapp):
    doc = login(webapp, "p02")
    res = webapp.post("/api/mode", headers=auth(doc), json={"mode": "automated"})
    assert res.json()["old"] == "hybrid"
    assert res.json()["new"] == "automated"
    assert webapp.get("/api/me", headers=auth(doc)).json()["mode"] == "automated"
    bad = webapp.post("/api/mode", headers=auth(doc), json={"mode": "chaotic"})
    assert bad.status_code == 400


# -- field, timeline, chat, weather -----------------------------------------------------


def test_field_view_scopes_and_styles(webapp, engine):
    doc = login(webapp)
    engine.submit_task("p01", Sow("radish", Coord2(450, 450)))
    engine.drain_queue()
    body = webapp.get("/api/field", headers=auth(doc)).json()
    assert len(body["plots"]) == 18
    assert body["plots"][0] == {"plot_id": "plot-01", "origin": [0, 0],
                                "size_mm": 1000, "owner": "p01"}
    assert body["moisture"]["cell_mm"] == 100
    assert body["snapshot"] == {"style": "abstract", "day": None, "refs": []}

    scoped = webapp.get("/api/field", headers=auth(doc),
                        params={"scope": "plot", "plot_id": "plot-01"}).json()
    assert [p["plot_id"] for p in scoped["plots"]] == ["plot-01"]
    assert len(scoped["plants"]) == 1

    engine.advance_to(EPOCH + timedelta(days=1))
    grid = webapp.get("/api/field", headers=auth(doc),
                      params={"style": "photo_grid"}).json()["snapshot"]
    assert grid["day"] == 1
    assert len(grid["refs"]) == 18
    assert grid["refs"][0] == "/api/timelapse/1/topdown?plot_id=plot-01"

    assert webapp.get("/api/field", headers=auth(doc),
                      params={"scope": "plot"}).status_code == 400
    assert webapp.get("/api/field", headers=auth(doc),
                      params={"style": "oil_painting"}).status_code == 400


def test_timeline_filters_over_http(webapp, engine):
    doc = login(webapp)  # the login itself lands in the timeline
    engine.submit_task("p01", Sow("radish", Coord2(450, 450)))
    engine.drain_queue()
    events = webapp.get("/api/timeline", headers=auth(doc)).json()["events"]
    assert [e["kind"] for e in events] == ["system", "sow"]
    sows = webapp.get("/api/timeline", headers=auth(doc),
                      params={"kind": "sow"}).json()["events"]
    assert len(sows) == 1
    assert sows[0]["payload"]["task_id"] == "t-000001"
    after = webapp.get("/api/timeline", headers=auth(doc),
                       params={"after_id": events[-1]["id"]}).json()["events"]
    assert after == []


def test_chat_over_http(webapp):
    a, b = login(webapp), login(webapp, "p02")
    posted = webapp.post("/api/chat", headers=auth(a),
                         json={"message": "morning"}).json()
    assert posted["id"] == 1
    msgs = webapp.get("/api/chat", headers=auth(b)).json()["messages"]
    assert [m["message"] for m in msgs] == ["morning"]
    too_long = webapp.post("/api/chat", headers=auth(a),
                           json={"message": "x" * 2001})
    assert too_long.status_code == 400
    assert too_long.json()["error"]["code"] == 1505


def test_feedback_over_http(webapp, engine):
    doc = login(webapp)
    res = webapp.post("/api/feedback", headers=auth(doc),
                      json={"message": "more lettuce please"})
    assert res.status_code == 200
    notes = [e for e in engine.field.timeline.query(actor="p01", kind="system")
             if e.payload["what"] == "feedback"]
    assert len(notes) == 1


def test_weather_endpoint_and_outage_503(webapp, make_engine):
    doc = login(webapp)
    view = webapp.get("/api/weather", headers=auth(doc)).json()
    assert view["stale"] is False
    assert view["current"]["raining"] is False

    dark = TestClient(create_app(
        make_engine(weather=StubProvider(EPOCH, outage_days={1})),
        keepalive_s=0.05, session_ttl_s=3600.0))
    doc = login(dark)
    res = dark.get("/api/weather", headers=auth(doc))
    assert res.status_code == 503
    assert res.json()["error"]["code"] == 1506


# -- time-lapse over http ----------------------------------------------------------------


def test_timelapse_endpoints(webapp, engine):
    doc = login(webapp)
    assert webapp.get("/api/timelapse", headers=auth(doc)).json()["days"] == []
    engine.submit_task("p01", Sow("radish", Coord2(450, 450)))
    engine.drain_queue()
    engine.advance_to(EPOCH + timedelta(days=2))
    index = webapp.get("/api/timelapse", headers=auth(doc)).json()
    assert [d["day"] for d in index["days"]] == [1, 2]
    assert index["perspectives"] == ["topdown", "cameraA", "cameraB", "cameraC"]

    png = webapp.get("/api/timelapse/2/topdown", headers=auth(doc))
    assert png.status_code == 200
    assert png.headers["content-type"] == "image/png"
    assert png.content[:8] == b"\x89PNG\r\n\x1a\n"

    crop = webapp.get("/api/timelapse/2/topdown", headers=auth(doc),
                      params={"plot_id": "plot-01"})
    assert crop.status_code == 200

    missing = webapp.get("/api/timelapse/9/topdown", headers=auth(doc))
    assert missing.status_code == 404
    assert missing.json()["error"]["code"] == 1401
    assert webapp.get("/api/timelapse/2/worms_eye",
                      headers=auth(doc)).status_code == 400
    assert webapp.get("/api/timelapse/2/topdown", headers=auth(doc),
                      params={"plot_id": "plot-99"}).status_code == 404


# -- sse stream ---------------------------------------------------------------------------


def parse_sse(text: str) -> list[dict]:
    """Parse SSE framing into [{id, event, data}] entries, skipping comments."""
    out = []
    for block in text.split("\n\n"):
        fields = {}
        for line in block.splitlines():
            if line.startswith(":") or not line.strip():
                continue
            key, _, value = line.partition(": ")
            fields[key] = value
        if "event" in fields:
            out.append(fields)
    return out


def catch_up(client, headers, **params):
    """One finite pass over /api/stream in catch-up mode."""
    res = client.get("/api/stream", headers=headers,
                     params={"once": "true", **params})
    assert res.status_code == 200
    assert res.headers["content-type"].startswith("text/event-stream")
    return res.text


def test_stream_replays_backlog_with_cursor(webapp, engine):
    doc = login(webapp)
    engine.submit_task("p01", Sow("radish", Coord2(450, 450)))
    engine.drain_queue()
    raw = catch_up(webapp, auth(doc), cursor=0)
    assert raw.startswith("retry: 3000")
    events = parse_sse(raw)
    types = [e["event"] for e in events]
    assert "queue.submitted" in types
    assert "queue.done" in types
    assert "timeline.event" in types
    ids = [int(e["id"]) for e in events]
    assert ids == sorted(ids)

    # resuming from a cursor replays only the tail
    cut = ids[len(ids) // 2]
    tail = parse_sse(catch_up(webapp, auth(doc), cursor=cut))
    assert [int(e["id"]) for e in tail] == [i for i in ids if i > cut]

    # Last-Event-ID works the same way
    hdrs = {**auth(doc), "Last-Event-ID": str(cut)}
    res = webapp.get("/api/stream", headers=hdrs, params={"once": "true"})
    assert [int(e["id"]) for e in parse_sse(res.text)] == [i for i in ids if i > cut]


def test_stream_topic_filter(webapp, engine):
    doc = login(webapp)
    engine.submit_task("p01", Sow("radish", Coord2(450, 450)))
    engine.drain_queue()
    engine.post_chat("p01", "hello")
    events = parse_sse(catch_up(webapp, auth(doc), topics="chat", cursor=0))
    assert all(e["event"] == "chat.message" for e in events)
    assert len(events) == 1


def test_live_stream_over_socket(make_engine):
    """Real server, real socket: events published after connect arrive live,
    with keepalive comments between them."""
    import socket
    import threading
    import time as wall

    import httpx
    import uvicorn

    engine = make_engine()
    app = create_app(engine, keepalive_s=0.05, session_ttl_s=3600.0)
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = wall.monotonic() + 10
    while not server.started:
        assert wall.monotonic() < deadline, "server failed to start"
        wall.sleep(0.01)

    base = f"http://127.0.0.1:{port}"
    try:
        doc = httpx.post(f"{base}/api/login", json={
            "user_id": "p01", "password": "pw-p01"}).json()
        hdrs = {"Authorization": f"Bearer {doc['token']}"}
        got: list[str] = []
        saw_keepalive = False
        posted = False
        hard_deadline = wall.monotonic() + 15
        with httpx.stream("GET", f"{base}/api/stream", headers=hdrs,
                          timeout=10.0) as res:
            assert res.status_code == 200
            for line in res.iter_lines():
                assert wall.monotonic() < hard_deadline, (got, saw_keepalive)
                if line.startswith("retry:") and not posted:
                    # the retry preamble proves the subscription is live
                    engine.post_chat("p01", "live one")
                    engine.post_chat("p01", "live two")
                    posted = True
                if line.startswith(": keepalive"):
                    saw_keepalive = True
                if line.startswith("data: "):
                    body = json.loads(line[6:])
                    if body["type"] == "chat.message":
                        got.append(body["data"]["message"])
                if len(got) >= 2 and saw_keepalive:
                    break
        # the login event predates the subscription; only live pushes count
        assert got == ["live one", "live two"]
    finally:
        server.should_exit = True
        thread.join(timeout=5)
