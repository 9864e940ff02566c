import threading
import time

import pytest
from fastapi.testclient import TestClient

from prefteach.kb import PreferenceKB
from prefteach.service import ServiceConfig, create_app


@pytest.fixture
def client(schema, quick_bundle, tmp_path):
    kb = PreferenceKB(tmp_path / "kb", entity_types=schema.entity_types)
    app = create_app(schema, quick_bundle, kb)
    return TestClient(app)


RESPONSE_SCHEMAS = {
    "create_session": {"session_id", "user_id", "phase"},
    "utterance": {"agent_steps", "phase"},
    "step": {"kind", "name", "confidence"},
}


def test_health(client):
    r = client.get("/api/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_create_session_contract(client):
    r = client.post("/api/session", json={"user_id": "u1"})
    assert r.status_code == 200
    body = r.json()
    assert RESPONSE_SCHEMAS["create_session"] <= set(body)
    assert body["phase"] == "AwaitUser"


def test_utterance_happy_path_contract(client):
    sid = client.post("/api/session", json={"user_id": "u1"}).json()["session_id"]
    r = client.post(f"/api/session/{sid}/utterance", json={"text": "i love the yankees"})
    assert r.status_code == 200
    body = r.json()
    assert RESPONSE_SCHEMAS["utterance"] <= set(body)
    steps = body["agent_steps"]
    assert steps and all(RESPONSE_SCHEMAS["step"] <= set(s) for s in steps)
    names = [s["name"] for s in steps]
    assert "setSportAffinity" in names
    nlg = [s for s in steps if s["kind"] == "nlg"]
    assert nlg and all(s.get("text") for s in nlg)


def test_utterance_unknown_session_404(client):
    r = client.post("/api/session/ghost/utterance", json={"text": "hello"})
    assert r.status_code == 404


def test_utterance_malformed_body_400(client):
    sid = client.post("/api/session", json={"user_id": "u1"}).json()["session_id"]
    r = client.post(f"/api/session/{sid}/utterance", json={"wrong_field": 1})
    assert r.status_code == 400
    r = client.post("/api/session", json={})
    assert r.status_code == 400


def test_utterance_after_end_409(client):
    sid = client.post("/api/session", json={"user_id": "u1"}).json()["session_id"]
    r = client.post(f"/api/session/{sid}/utterance", json={"text": "i love the yankees"})
    phase = r.json()["phase"]
    if phase != "Ended":  # drive to the end with a closing turn
        r = client.post(f"/api/session/{sid}/utterance", json={"text": "that is all"})
        phase = r.json()["phase"]
    assert phase == "Ended"
    r = client.post(f"/api/session/{sid}/utterance", json={"text": "hello?"})
    assert r.status_code == 409


def test_preferences_empty_then_taught(client):
    assert client.get("/api/preferences/u-new").json() == []
    sid = client.post("/api/session", json={"user_id": "u-new"}).json()["session_id"]
    client.post(f"/api/session/{sid}/utterance", json={"text": "i love the warriors"})
    prefs = client.get("/api/preferences/u-new").json()
    assert any(p["entity_value"] == "the warriors" for p in prefs)


def test_preferences_reset_contract(client):
    sid = client.post("/api/session", json={"user_id": "u-r"}).json()["session_id"]
    client.post(f"/api/session/{sid}/utterance", json={"text": "i love the warriors"})
    r = client.post("/api/preferences/u-r/reset", json={"confirm": False})
    assert r.status_code == 400
    r = client.post("/api/preferences/u-r/reset", json={"confirm": True})
    assert r.status_code == 200 and r.json()["deleted"] >= 1
    assert client.get("/api/preferences/u-r").json() == []


def test_transcript_endpoint(client):
    sid = client.post("/api/session", json={"user_id": "u-t"}).json()["session_id"]
    client.post(f"/api/session/{sid}/utterance", json={"text": "i love the mets"})
    r = client.get(f"/api/session/{sid}")
    assert r.status_code == 200
    body = r.json()
    assert body["session_id"] == sid
    turns = body["transcript"]["turns"]
    assert len(turns) == 1
    assert turns[0]["user"]["utterance"]["text"] == "i love the mets"
    assert client.get("/api/session/ghost").status_code == 404


def test_concurrent_posts_serialize(schema, quick_bundle, tmp_path):
    """Two concurrent utterances to one session: one 200, one 409."""
    kb = PreferenceKB(tmp_path / "kb", entity_types=schema.entity_types)

    class SlowBundle:
        def __getattr__(self, name):
            return getattr(quick_bundle, name)

        def predict_entities(self, tokens, schema):
            time.sleep(0.4)
            return quick_bundle.predict_entities(tokens, schema)

    app = create_app(schema, SlowBundle(), kb)
    client = TestClient(app)
    sid = client.post("/api/session", json={"user_id": "u1"}).json()["session_id"]

    codes = []

    def post():
        r = client.post(f"/api/session/{sid}/utterance", json={"text": "i love the cubs"})
        codes.append(r.status_code)

    t1 = threading.Thread(target=post)
    t2 = threading.Thread(target=post)
    t1.start()
    time.sleep(0.1)
    t2.start()
    t1.join()
    t2.join()
    assert sorted(codes) == [200, 409]


def test_static_ui_bundle_served_when_configured(schema, quick_bundle, tmp_path):
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html><body>console</body></html>")
    (static / "app.js").write_text("export {};")
    kb = PreferenceKB(tmp_path / "kb", entity_types=schema.entity_types)
    config = ServiceConfig(schema_path="", bundle_path="", kb_path="", static_dir=str(static))
    client = TestClient(create_app(schema, quick_bundle, kb, config))
    assert client.get("/api/health").status_code == 200  # API routes still win
    r = client.get("/")
    assert r.status_code == 200 and "console" in r.text
    assert client.get("/app.js").status_code == 200


def test_chat_and_service_identical_step_sequences(schema, quick_bundle, tmp_path):
    """The HTTP surface and a direct manager session agree given the same seed."""
    from prefteach.manager import handle_utterance, open_session

    kb1 = PreferenceKB(tmp_path / "kb1", entity_types=schema.entity_types)
    kb2 = PreferenceKB(tmp_path / "kb2", entity_types=schema.entity_types)

    config = ServiceConfig(schema_path="", bundle_path="", kb_path="", seed=41)
    app = create_app(schema, quick_bundle, kb1, config)
    client = TestClient(app)
    sid = client.post("/api/session", json={"user_id": "u1"}).json()["session_id"]

    session = open_session("u1", seed=42)  # service sessions start at seed+1
    script = ["i love the yankees"]
    for line in script:
        http_steps = client.post(f"/api/session/{sid}/utterance", json={"text": line}).json()["agent_steps"]
        local_steps = handle_utterance(session, line, quick_bundle, schema, kb2)
        assert [(s["kind"], s["name"], s.get("text")) for s in http_steps] == [
            (s.action.kind.value, s.action.name, s.text) for s in local_steps
        ]
