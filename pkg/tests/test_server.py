import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from fieldnav.config import RunConfig
from fieldnav.scene import PerlinConfig, SceneManifest
from fieldnav.server import create_app, replay_session
from fieldnav.sim import dilemma_scenario


def _room_manifest():
    return SceneManifest(
        seed=0,
        difficulty=0.0,
        room=(5.0, 5.0, 2.2),
        resolution=0.05,
        boxes=[],
        perlin=PerlinConfig(),
        morph_radius_vox=0,
        start=np.array([1.025, 2.525, 0.725]),
        goal=np.array([3.025, 2.525, 0.725]),
    )


@pytest.fixture(scope="module")
def client():
    app = create_app(RunConfig())
    with TestClient(app) as c:
        yield c


def _start_session(client, manifest=None):
    payload = {"manifest": (manifest or _room_manifest()).to_dict()}
    response = client.post("/session", json=payload)
    assert response.status_code == 200, response.text
    return response.json()


def test_session_initial_snapshot(client):
    data = _start_session(client)
    assert data["proto"] == 1
    frame = data["state"]
    assert frame["type"] == "state"
    assert frame["status"] == "idle"
    assert frame["agent"]["xy"] == pytest.approx([1.025, 2.525])
    assert len(frame["parts"]) == 13


def test_two_sessions_identical_snapshots_independent_ids(client):
    a = _start_session(client)
    b = _start_session(client)
    assert a["id"] != b["id"]
    fa, fb = a["state"], b["state"]
    assert fa["agent"] == fb["agent"]
    assert fa["goal"] == fb["goal"]


def test_uncertifiable_scene_rejected(client):
    from fieldnav.grid import OrientedBox

    bad = _room_manifest()
    bad.boxes = [OrientedBox([2.5, 2.5, 1.1], [0.2, 2.6, 1.1], np.eye(3))]
    response = client.post("/session", json={"manifest": bad.to_dict()})
    assert response.status_code == 422


def test_malformed_manifest_rejected(client):
    response = client.post("/session", json={"manifest": {"scene_schema": 99}})
    assert response.status_code == 422
    response = client.post("/session", json={})
    assert response.status_code == 422


def test_scene_endpoint_blocked_mask(client):
    data = _start_session(client, dilemma_scenario())
    response = client.get(f"/session/{data['id']}/scene")
    assert response.status_code == 200
    body = response.json()
    blocked = np.array(body["blocked"], dtype=bool)
    assert blocked.shape == tuple(body["dims"][:2])
    assert blocked[0, :].all() and blocked[-1, :].all()  # room walls
    assert blocked[50, 50]  # the central wall
    assert not blocked[10, 50]


def test_goal_snap_and_rejection(client):
    data = _start_session(client, dilemma_scenario())
    sid = data["id"]
    ok = client.post(f"/session/{sid}/goal", json={"x": 1.0, "y": 1.0})
    assert ok.status_code == 200
    goal = ok.json()["goal"]
    assert abs(goal[0] - 1.0) <= 0.26 and abs(goal[1] - 1.0) <= 0.26
    inside_wall = client.post(f"/session/{sid}/goal", json={"x": 2.5, "y": 2.525})
    assert inside_wall.status_code in (200, 422)  # may snap to a side cell
    outside = client.post(f"/session/{sid}/goal", json={"x": 99.0, "y": 1.0})
    assert outside.status_code == 422
    bad_payload = client.post(f"/session/{sid}/goal", json={"x": "wat"})
    assert bad_payload.status_code == 422
    missing = client.post("/session/zzz/goal", json={"x": 1.0, "y": 1.0})
    assert missing.status_code == 404


def test_stream_and_goal_roundtrip(client):
    data = _start_session(client)
    sid = data["id"]
    with client.websocket_connect(f"/session/{sid}/stream") as ws:
        first = json.loads(ws.receive_text())
        assert first["type"] == "state"
        # Collinear with the start row: the straight-line case advances the
        # root exactly 5 x dt x speed = 0.1 m per broadcast tick.
        response = client.post(f"/session/{sid}/goal", json={"x": 3.5, "y": 2.525})
        assert response.status_code == 200
        snapped = response.json()["goal"]
        seen_ack = False
        goal_frame = None
        ticks = []
        for _ in range(60):
            message = json.loads(ws.receive_text())
            if message["type"] == "ack":
                assert message["goal"] == snapped
                seen_ack = True
            elif message["type"] == "state":
                ticks.append(message["tick"])
                if message["goal"] == snapped:
                    # Goal must never appear in a frame before its ack.
                    assert seen_ack
                    goal_frame = message
                    break
        assert seen_ack and goal_frame is not None
        assert all(b > a for a, b in zip(ticks, ticks[1:]))
        # After the swap the agent traverses: root advances ~0.1 m per tick.
        frames = []
        for _ in range(10):
            message = json.loads(ws.receive_text())
            if message["type"] == "state":
                frames.append(message)
        assert frames[-1]["status"] in ("traversing", "reached")
        moving = [
            np.linalg.norm(np.subtract(b["agent"]["xy"], a["agent"]["xy"]))
            for a, b in zip(frames, frames[1:])
            if a["status"] == "traversing" and b["status"] == "traversing"
        ]
        steady = [step for step in moving if step > 0.05]
        assert steady, "expected full-speed frames"
        # 5 sub-steps x 0.02 s x 1 m/s: 0.1 m per tick on a straight line.
        assert all(abs(step - 0.1) <= 1e-9 for step in steady)


def test_teleport_collision_freezes_motion(client):
    data = _start_session(client, dilemma_scenario())
    sid = data["id"]
    response = client.post(f"/session/{sid}/debug/teleport", json={"x": 2.5, "y": 2.525})
    assert response.status_code == 200
    deadline = time.time() + 3.0
    status = None
    while time.time() < deadline:
        log = client.get(f"/session/{sid}/log").json()
        status = log["history"][-1]["status"]
        if status == "collided":
            break
        time.sleep(0.1)
    assert status == "collided"
    rejected = client.post(f"/session/{sid}/goal", json={"x": 1.0, "y": 1.0})
    assert rejected.status_code == 409
    log = client.get(f"/session/{sid}/log").json()
    frozen_xy = log["history"][-1]["root_xy"]
    time.sleep(0.4)
    log2 = client.get(f"/session/{sid}/log").json()
    assert log2["history"][-1]["root_xy"] == frozen_xy


def test_replay_reproduces_live_session(client):
    manifest = _room_manifest()
    data = _start_session(client, manifest)
    sid = data["id"]
    time.sleep(0.35)
    assert client.post(f"/session/{sid}/goal", json={"x": 3.5, "y": 2.5}).status_code == 200
    time.sleep(1.2)
    assert client.post(f"/session/{sid}/goal", json={"x": 1.5, "y": 3.5}).status_code == 200
    time.sleep(1.2)
    log = client.get(f"/session/{sid}/log").json()
    assert log["events"], "expected recorded goal events"
    replayed = replay_session(
        SceneManifest.from_dict(log["manifest"]),
        RunConfig(),
        log["events"],
        total_ticks=log["ticks"],
    )
    live = log["history"]
    assert len(replayed) == len(live)
    for got, want in zip(replayed, live):
        assert got["tick"] == want["tick"]
        assert got["status"] == want["status"]
        assert np.allclose(got["root_xy"], want["root_xy"], atol=1e-9)
        assert abs(got["height_scale"] - want["height_scale"]) <= 1e-9
        assert abs(got["lean"] - want["lean"]) <= 1e-9
