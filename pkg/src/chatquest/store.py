"""Session persistence: one JSON document per session, written atomically.

Saves go through a temp file in the same directory followed by os.replace,
so a session file on disk is always a complete document — a crash mid-save
leaves the previous version in place and at worst a stray *.tmp file, which
the next startup sweeps up. The startup scan rebuilds the in-memory index
from whatever survived, skipping (and logging) anything unreadable rather
than refusing to start.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from pathlib import Path

from .engine import GameSession, session_from_document, session_to_document
from .errors import ParseError, SessionNotFound

logger = logging.getLogger("chatquest.store")


class SessionStore:
    def __init__(self, data_dir: str | Path):
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._index: dict[str, GameSession] = {}
        self._recover()

    # -- public ------------------------------------------------------------

    def save(self, session: GameSession) -> None:
        """Persist and index the session; atomic on the filesystem."""
        document = session_to_document(session)
        payload = json.dumps(document, sort_keys=True, ensure_ascii=True,
                             separators=(",", ":")) + "\n"
        final_path = self._path(session.session_id)
        tmp_path = self._dir / f"{session.session_id}.{uuid.uuid4().hex}.tmp"
        with open(tmp_path, "w", encoding="utf-8") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_path, final_path)
        with self._lock:
            self._index[session.session_id] = session

    def get(self, session_id: str) -> GameSession:
        with self._lock:
            try:
                return self._index[session_id]
            except KeyError:
                raise SessionNotFound(session_id) from None

    def __contains__(self, session_id: str) -> bool:
        with self._lock:
            return session_id in self._index

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._index)

    def __len__(self) -> int:
        with self._lock:
            return len(self._index)

    # -- recovery ------------------------------------------------------------

    def _path(self, session_id: str) -> Path:
        return self._dir / f"{session_id}.json"

    def _recover(self) -> None:
        recovered = skipped = 0
        for stale in self._dir.glob("*.tmp"):
            stale.unlink(missing_ok=True)
        for path in sorted(self._dir.glob("*.json")):
            try:
                document = json.loads(path.read_text(encoding="utf-8"))
                session = session_from_document(document)
            except (OSError, ValueError, ParseError) as exc:
                skipped += 1
                logger.warning("skipping unreadable session file %s: %s", path.name, exc)
                continue
            if session.session_id != path.stem:
                skipped += 1
                logger.warning("skipping %s: session_id %r does not match filename",
                               path.name, session.session_id)
                continue
            self._index[session.session_id] = session
            recovered += 1
        if recovered or skipped:
            logger.info("session store recovered %d session(s), skipped %d",
                        recovered, skipped)
