import numpy as np
import pytest
from fastapi.testclient import TestClient

from touchguard import capsim
from touchguard.authd import AuthService, create_app
from touchguard.capsim import SensorConfig


def gesture_stream(profile, kind, n, seed0, config):
    """Concatenate n padded gestures into one frame stream (nested lists)."""
    chunks = []
    for i in range(n):
        frames, _ = capsim.synth_gesture(profile, kind, config, [seed0, i])
        chunks.append(frames)
    return np.concatenate(chunks, axis=0)


@pytest.fixture(scope="module")
def setup():
    config = SensorConfig()
    profiles = capsim.make_profiles(2, spread=1.5, seed=0)
    alice, mallory = profiles
    enroll = gesture_stream(alice, "tap", 40, 100, config)
    genuine = gesture_stream(alice, "tap", 20, 200, config)
    impostor = gesture_stream(mallory, "tap", 20, 300, config)
    return config, enroll, genuine, impostor


@pytest.fixture()
def client(tmp_path, setup):
    config = setup[0]
    app = create_app(model_dir=str(tmp_path / "models"), config=config)
    return TestClient(app)


def test_enroll_insufficient_samples(client, setup):
    _, enroll, _, _ = setup
    short = enroll[:200]  # only a handful of gestures
    r = client.post("/users/alice/enroll", json={"kind": "tap",
                                                 "frames": short.tolist()})
    assert r.status_code == 422
    detail = r.json()["detail"]
    assert detail["error"] == "insufficient_samples"
    assert detail["need_more"] == 30 - detail["got"]
    assert detail["floor"] == 30


def test_enroll_and_authenticate_flow(client, setup):
    _, enroll, genuine, impostor = setup
    r = client.post("/users/alice/enroll", json={"kind": "tap",
                                                 "frames": enroll.tolist()})
    assert r.status_code == 200
    body = r.json()
    assert body["gesture_count"] == 40
    assert body["acceptance_quantile"] == 0.05

    r = client.post("/sessions", json={"user_id": "alice", "kind": "tap"})
    assert r.status_code == 200
    sid = r.json()["session_id"]

    def stream(frames, session_id, chunk=25):
        decisions = []
        with client.websocket_connect(f"/sessions/{session_id}/frames") as ws:
            for i in range(0, len(frames), chunk):
                ws.send_json({"session": session_id,
                              "frames": frames[i:i + chunk].tolist(),
                              "t0": i / 30.0})
                while True:
                    msg = ws.receive_json()
                    if "ack" in msg:
                        break
                    assert "error" not in msg, msg
                    decisions.append(msg)
        return decisions

    genuine_decisions = stream(genuine, sid)
    assert len(genuine_decisions) >= 15  # completed gestures got decisions
    accept_rate = np.mean([d["accept"] for d in genuine_decisions])
    assert accept_rate > 0.5

    r = client.post("/sessions", json={"user_id": "alice", "kind": "tap"})
    sid2 = r.json()["session_id"]
    impostor_decisions = stream(impostor, sid2)
    assert len(impostor_decisions) >= 15
    reject_rate = np.mean([not d["accept"] for d in impostor_decisions])
    assert reject_rate > 0.5

    # replay determinism: same stream, fresh session, identical decisions
    r = client.post("/sessions", json={"user_id": "alice", "kind": "tap"})
    sid3 = r.json()["session_id"]
    replay = stream(genuine, sid3)
    assert [(d["gesture_index"], d["score"], d["accept"]) for d in replay] == \
           [(d["gesture_index"], d["score"], d["accept"]) for d in genuine_decisions]

    # decision log endpoint mirrors streamed decisions
    log = client.get(f"/sessions/{sid3}/log").json()["decisions"]
    assert log == replay


def test_unenrolled_user_rejected(client):
    r = client.post("/sessions", json={"user_id": "nobody", "kind": "tap"})
    assert r.status_code == 404


def test_empty_chunk_no_decisions(client, setup):
    _, enroll, _, _ = setup
    client.post("/users/alice/enroll", json={"kind": "tap",
                                             "frames": enroll.tolist()})
    sid = client.post("/sessions", json={"user_id": "alice",
                                         "kind": "tap"}).json()["session_id"]
    with client.websocket_connect(f"/sessions/{sid}/frames") as ws:
        ws.send_json({"session": sid, "frames": [], "t0": 0.0})
        msg = ws.receive_json()
        assert msg == {"ack": 0, "pending_frames": 0}


def test_malformed_frames_rejected_per_chunk(client, setup):
    _, enroll, genuine, _ = setup
    client.post("/users/alice/enroll", json={"kind": "tap",
                                             "frames": enroll.tolist()})
    sid = client.post("/sessions", json={"user_id": "alice",
                                         "kind": "tap"}).json()["session_id"]
    with client.websocket_connect(f"/sessions/{sid}/frames") as ws:
        ws.send_json({"session": sid, "frames": [[[1.0, 2.0]]], "t0": 0.0})
        msg = ws.receive_json()
        assert "error" in msg
        # session still usable afterwards
        ws.send_json({"session": sid, "frames": genuine[:10].tolist(), "t0": 0.0})
        msg = ws.receive_json()
        assert "ack" in msg or "gesture_index" in msg


def test_reenrollment_overwrites_atomically(client, setup):
    _, enroll, genuine, _ = setup
    r1 = client.post("/users/alice/enroll", json={"kind": "tap",
                                                  "frames": enroll.tolist()})
    t1 = r1.json()["threshold"]
    combined = np.concatenate([enroll, genuine], axis=0)
    r2 = client.post("/users/alice/enroll", json={"kind": "tap",
                                                  "frames": combined.tolist()})
    assert r2.status_code == 200
    assert r2.json()["gesture_count"] == 60
    assert r2.json()["threshold"] != t1


def test_service_enrollment_floor_direct(tmp_path, setup):
    config, enroll, _, _ = setup
    service = AuthService(model_dir=str(tmp_path / "m"), default_config=config)
    summary = service.enroll("bob", "tap", frames=enroll)
    assert summary["gesture_count"] == 40
    session = service.open_session("bob", "tap")
    decisions = service.authenticate_chunk(session, enroll[:100])
    assert all(set(d) == {"gesture_index", "score", "accept"} for d in decisions)


def test_buffer_bounded(tmp_path, setup):
    config, enroll, _, _ = setup
    service = AuthService(model_dir=str(tmp_path / "m"), default_config=config)
    service.enroll("bob", "tap", frames=enroll)
    session = service.open_session("bob", "tap")
    # feed touching frames continuously so nothing completes
    touch = enroll[np.array([f.max() > 10 for f in enroll])]
    for _ in range(5):
        service.authenticate_chunk(session, touch[:100])
    assert len(session.buffer) <= int(10.0 * config.frame_rate)
