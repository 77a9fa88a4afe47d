from __future__ import annotations

import json
import threading

import pytest

from chatquest.clocks import TickingClock
from chatquest.corpus import load_corpus
from chatquest.engine import canonical_session_json, new_session, session_to_document
from chatquest.errors import SessionNotFound
from chatquest.store import SessionStore


@pytest.fixture
def corpus(fixtures_dir):
    return load_corpus(fixtures_dir / "minimal.json")


def test_save_and_get(tmp_path, corpus):
    store = SessionStore(tmp_path)
    session = new_session(corpus, TickingClock())
    store.save(session)
    assert store.get(session.session_id) is session
    assert session.session_id in store
    assert len(store) == 1
    on_disk = json.loads((tmp_path / f"{session.session_id}.json").read_text())
    assert on_disk == session_to_document(session)


def test_get_unknown_raises(tmp_path):
    store = SessionStore(tmp_path)
    with pytest.raises(SessionNotFound):
        store.get("nope")


def test_file_is_canonical_json(tmp_path, corpus):
    store = SessionStore(tmp_path)
    session = new_session(corpus, TickingClock())
    store.save(session)
    raw = (tmp_path / f"{session.session_id}.json").read_text(encoding="utf-8")
    assert raw == canonical_session_json(session)


def test_restart_recovers_sessions(tmp_path, corpus):
    clock = TickingClock()
    store = SessionStore(tmp_path)
    sessions = [new_session(corpus, clock) for _ in range(5)]
    for s in sessions:
        store.save(s)

    reopened = SessionStore(tmp_path)
    assert reopened.ids() == sorted(s.session_id for s in sessions)
    for s in sessions:
        assert canonical_session_json(reopened.get(s.session_id)) == canonical_session_json(s)


def test_recovery_skips_torn_and_foreign_files(tmp_path, corpus, caplog):
    store = SessionStore(tmp_path)
    good = new_session(corpus, TickingClock())
    store.save(good)

    (tmp_path / "torn.json").write_text('{"schema_version": 1, "sess')  # cut mid-write
    (tmp_path / "empty.json").write_text("")
    (tmp_path / "wrongname.json").write_text(
        json.dumps(session_to_document(new_session(corpus, TickingClock()))))
    (tmp_path / "notes.txt").write_text("not a session")

    with caplog.at_level("WARNING", logger="chatquest.store"):
        reopened = SessionStore(tmp_path)
    assert reopened.ids() == [good.session_id]
    assert len(caplog.records) >= 3


def test_recovery_sweeps_stale_tmp_files(tmp_path, corpus):
    store = SessionStore(tmp_path)
    session = new_session(corpus, TickingClock())
    store.save(session)
    stale = tmp_path / f"{session.session_id}.deadbeef.tmp"
    stale.write_text("half a docum")

    reopened = SessionStore(tmp_path)
    assert not stale.exists()
    assert reopened.ids() == [session.session_id]


def test_save_overwrites_atomically(tmp_path, corpus):
    store = SessionStore(tmp_path)
    session = new_session(corpus, TickingClock())
    store.save(session)
    session.status = "abandoned"
    store.save(session)
    on_disk = json.loads((tmp_path / f"{session.session_id}.json").read_text())
    assert on_disk["status"] == "abandoned"
    assert list(tmp_path.glob("*.tmp")) == []


def test_concurrent_saves_do_not_corrupt(tmp_path, corpus):
    store = SessionStore(tmp_path)
    clock = TickingClock()
    sessions = [new_session(corpus, clock) for _ in range(20)]

    def worker(session):
        for _ in range(10):
            store.save(session)

    threads = [threading.Thread(target=worker, args=(s,)) for s in sessions]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    reopened = SessionStore(tmp_path)
    assert len(reopened) == 20
    for s in sessions:
        assert canonical_session_json(reopened.get(s.session_id)) == canonical_session_json(s)
