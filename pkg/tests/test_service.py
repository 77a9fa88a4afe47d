from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from chatquest.clocks import TickingClock
from chatquest.corpus import load_corpus
from chatquest.engine import canonical_session_json
from chatquest.gateway import CannedGateway, Script, ScriptedGateway
from chatquest.service import ServiceConfig, create_app
from chatquest.store import SessionStore
from chatquest.textnorm import rubric_digest


def make_app(tmp_path, sample_corpus_path, *, gateway=None, policy="lexical",
             clock=None):
    config = ServiceConfig(corpus_path=str(sample_corpus_path),
                           data_dir=str(tmp_path / "data"),
                           judge_policy=policy)
    return create_app(config, gateway=gateway or CannedGateway(),
                      clock=clock or TickingClock())


@pytest.fixture
def client(tmp_path, sample_corpus_path):
    app = make_app(tmp_path, sample_corpus_path)
    with TestClient(app) as c:
        yield c


@pytest.fixture
def sample(sample_corpus_path):
    return load_corpus(sample_corpus_path)


def start_session(client) -> dict:
    response = client.post("/api/sessions")
    assert response.status_code == 201
    return response.json()


# --- healthz / create / get -----------------------------------------------------


def test_healthz(client, sample):
    body = client.get("/healthz").json()
    assert body == {"status": "ok", "corpus_id": "eternagram-sample",
                    "corpus_hash": sample.content_hash}


def test_create_session_view_shape(client, sample):
    view = start_session(client)
    assert view["status"] == "active"
    assert view["current_level"] == 0
    assert view["final_level"] == 2
    assert view["character_name"] == "Ryno"
    assert view["corpus_hash"] == sample.content_hash
    assert view["goal_text"] == sample.levels[0].goal_text
    assert view["fired"] == []
    assert len(view["history"]) == 1
    assert view["history"][0]["kind"] == "npc"
    assert view["history"][0]["text"] == sample.prologue_text
    assert view["created_at"].endswith("Z")


def test_create_session_pins_corpus_hash(client, sample):
    ok = client.post("/api/sessions", json={"corpus_hash": sample.content_hash})
    assert ok.status_code == 201
    bad = client.post("/api/sessions", json={"corpus_hash": "f" * 64})
    assert bad.status_code == 409


def test_get_session_and_404(client):
    view = start_session(client)
    again = client.get(f"/api/sessions/{view['session_id']}")
    assert again.status_code == 200
    assert again.json() == view
    assert client.get("/api/sessions/no-such").status_code == 404


def test_sessions_survive_on_disk(tmp_path, sample_corpus_path, sample):
    app = make_app(tmp_path, sample_corpus_path)
    with TestClient(app) as client:
        view = start_session(client)
    store = SessionStore(tmp_path / "data")
    assert store.ids() == [view["session_id"]]


# --- messages ----------------------------------------------------------------------


def test_post_message_full_turn(tmp_path, sample_corpus_path, sample):
    app = make_app(tmp_path, sample_corpus_path)
    with TestClient(app) as client:
        view = start_session(client)
        response = client.post(
            f"/api/sessions/{view['session_id']}/messages",
            json={"message": "i think the climate collapse ruined it all"})
        assert response.status_code == 200
        body = response.json()
        assert body["reply"]
        assert body["blocked"] is False
        assert [f["trigger_id"] for f in body["fired"]] == ["t_climate_collapse"]
        assert body["fired"][0]["reveal_text"] == sample.triggers[
            "t_climate_collapse"].reveal_text
        transition = body["transition"]
        assert transition["new_level"] == 1
        assert transition["completed"] is False
        assert transition["next_goal_text"] == sample.levels[1].goal_text
        assert [m["media_id"] for m in transition["media"]] == ["m_skyline"]
        assert [m["media_id"] for m in body["unlocked"]] == ["m_skyline"]
        session = body["session"]
        assert session["current_level"] == 1
        assert [t["kind"] for t in session["history"]] == [
            "npc", "player", "npc", "cutscene"]


def test_post_message_no_trigger(client):
    view = start_session(client)
    body = client.post(f"/api/sessions/{view['session_id']}/messages",
                       json={"message": "hello, who are you?"}).json()
    assert body["fired"] == []
    assert body["transition"] is None
    assert body["unlocked"] == []
    assert body["session"]["current_level"] == 0


def test_post_message_validation(client):
    view = start_session(client)
    url = f"/api/sessions/{view['session_id']}/messages"
    assert client.post(url, json={"message": ""}).status_code == 422
    assert client.post(url, json={"message": "   "}).status_code == 422
    assert client.post(url, json={}).status_code == 422
    assert client.post(url, json={"message": "x" * 5000}).status_code == 422
    assert client.post("/api/sessions/ghost/messages",
                       json={"message": "hi"}).status_code == 404


def test_message_to_finished_session_conflicts(client):
    view = start_session(client)
    sid = view["session_id"]
    for message in (
        "the climate collapse did it",
        "you live underground in tunnels and hibernate in vr pods",
        "you are not human. you're an archive.",
    ):
        body = client.post(f"/api/sessions/{sid}/messages",
                           json={"message": message}).json()
    assert body["session"]["status"] == "completed"
    response = client.post(f"/api/sessions/{sid}/messages", json={"message": "hello?"})
    assert response.status_code == 409


def test_gateway_failure_returns_503_and_leaves_session_alone(
        tmp_path, sample_corpus_path):
    gateway = ScriptedGateway(Script(replies=["only one reply"]))
    app = make_app(tmp_path, sample_corpus_path, gateway=gateway)
    with TestClient(app) as client:
        view = start_session(client)
        sid = view["session_id"]
        first = client.post(f"/api/sessions/{sid}/messages", json={"message": "hi"})
        assert first.status_code == 200
        second = client.post(f"/api/sessions/{sid}/messages", json={"message": "hi again"})
        assert second.status_code == 503
        after = client.get(f"/api/sessions/{sid}").json()
        assert after == first.json()["session"]
        # disk still holds the last good state: prologue, player, npc
        store = SessionStore(tmp_path / "data")
        stored = json.loads(canonical_session_json(store.get(sid)))
        assert [t["kind"] for t in stored["history"]] == ["npc", "player", "npc"]
        assert stored["history"][1]["text"] == "hi"


def test_judge_policy_wired_through(tmp_path, sample_corpus_path, sample):
    rubric = sample.triggers["t_climate_collapse"].judge_rubric
    gateway = ScriptedGateway(Script(
        replies=["hm.", "oh!"],
        judge_replies={rubric_digest(rubric): ["NO. just small talk.",
                                               "YES. they named it."]}))
    app = make_app(tmp_path, sample_corpus_path, gateway=gateway, policy="judge")
    with TestClient(app) as client:
        sid = start_session(client)["session_id"]
        url = f"/api/sessions/{sid}/messages"
        first = client.post(url, json={"message": "climate, i guess?"}).json()
        assert first["fired"] == []
        second = client.post(url, json={"message": "the climate collapse drowned it"}).json()
        assert [f["trigger_id"] for f in second["fired"]] == ["t_climate_collapse"]


# --- abandon -------------------------------------------------------------------------


def test_abandon_flow(client):
    sid = start_session(client)["session_id"]
    first = client.post(f"/api/sessions/{sid}/abandon")
    assert first.status_code == 200
    assert first.json()["status"] == "abandoned"
    assert first.json()["goal_text"] == ""
    again = client.post(f"/api/sessions/{sid}/abandon")
    assert again.status_code == 409
    blocked = client.post(f"/api/sessions/{sid}/messages", json={"message": "hi"})
    assert blocked.status_code == 409
    assert client.post("/api/sessions/ghost/abandon").status_code == 404


# --- feed / assets ----------------------------------------------------------------------


def test_feed_endpoint_newest_first(client):
    sid = start_session(client)["session_id"]
    url = f"/api/sessions/{sid}/messages"
    assert client.get(f"/api/sessions/{sid}/feed").json() == {"items": []}
    client.post(url, json={"message": "is everything above just ruins?"})
    client.post(url, json={"message": "climate collapse, right?"})
    items = client.get(f"/api/sessions/{sid}/feed").json()["items"]
    assert [i["media_id"] for i in items] == ["m_skyline", "m_flooded_street"]
    assert items[0]["asset_url"] == "/assets/assets/skyline.png"
    assert items[0]["caption"]
    assert items[0]["unlocked_at"] > items[1]["unlocked_at"]
    assert client.get("/api/sessions/ghost/feed").status_code == 404


def test_assets_served(client):
    response = client.get("/assets/assets/skyline.png")
    assert response.status_code == 200
    assert response.headers["content-type"] == "image/png"
    assert response.content.startswith(b"\x89PNG")


def test_assets_confined(client):
    assert client.get("/assets/assets/nope.png").status_code == 404
    assert client.get("/assets/corpus.json").status_code == 200  # inside base dir
    for sneaky in ("/assets/../corpus.py", "/assets/%2e%2e/secret",
                   "/assets/..%2f..%2fetc%2fpasswd", "/assets//etc/passwd"):
        response = client.get(sneaky)
        assert response.status_code in (307, 404), sneaky
        if response.status_code == 307:
            # follow the normalized redirect; it must still be confined
            assert client.get(response.headers["location"]).status_code == 404


# --- concurrency ----------------------------------------------------------------------


class BlockingGateway:
    """complete() parks until released; lets tests overlap two turns."""

    def __init__(self):
        self.entered = threading.Event()
        self.release = threading.Event()

    def complete(self, messages):
        self.entered.set()
        assert self.release.wait(timeout=10)
        return "finally, a reply"

    def judge(self, rubric, utterance, context):
        return "YES. sure."


def test_concurrent_messages_one_wins_one_conflicts(tmp_path, sample_corpus_path):
    gateway = BlockingGateway()
    app = make_app(tmp_path, sample_corpus_path, gateway=gateway)
    with TestClient(app) as client_a, TestClient(app) as client_b:
        sid = start_session(client_a)["session_id"]
        url = f"/api/sessions/{sid}/messages"
        results = {}

        def slow_post():
            results["a"] = client_a.post(url, json={"message": "first in"})

        thread = threading.Thread(target=slow_post)
        thread.start()
        assert gateway.entered.wait(timeout=10)
        results["b"] = client_b.post(url, json={"message": "second in"})
        gateway.release.set()
        thread.join(timeout=10)

        assert results["b"].status_code == 409
        assert results["a"].status_code == 200
        history = client_a.get(f"/api/sessions/{sid}").json()["history"]
        assert [t["kind"] for t in history] == ["npc", "player", "npc"]
        assert history[1]["text"] == "first in"


def test_many_concurrent_session_creations(tmp_path, sample_corpus_path):
    app = make_app(tmp_path, sample_corpus_path)
    with TestClient(app) as client:
        with ThreadPoolExecutor(max_workers=16) as pool:
            responses = list(pool.map(
                lambda _: client.post("/api/sessions"), range(100)))
    assert all(r.status_code == 201 for r in responses)
    ids = {r.json()["session_id"] for r in responses}
    assert len(ids) == 100
    store = SessionStore(tmp_path / "data")
    assert len(store) == 100


# --- payload hygiene ---------------------------------------------------------------------


def test_no_secrets_in_any_payload(tmp_path, sample_corpus_path, sample):
    """Nothing the player hasn't earned may cross the wire."""
    app = make_app(tmp_path, sample_corpus_path)
    with TestClient(app) as client:
        sid = start_session(client)["session_id"]
        url = f"/api/sessions/{sid}/messages"
        payloads = [client.get("/healthz").text,
                    client.get(f"/api/sessions/{sid}").text,
                    client.get(f"/api/sessions/{sid}/feed").text]
        payloads.append(client.post(url, json={"message": "hello ryno"}).text)
        blob = "\n".join(payloads)
        assert sample.persona.identity_secret not in blob
        for trigger in sample.triggers.values():
            assert trigger.judge_rubric not in blob
            assert trigger.reveal_text not in blob  # none fired in 'hello ryno'
