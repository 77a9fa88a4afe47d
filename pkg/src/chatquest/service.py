"""HTTP service: the engine behind a small JSON API plus static assets.

Endpoints:

    POST /api/sessions                 start a session (optionally pin a corpus hash)
    GET  /api/sessions/{id}            session view
    POST /api/sessions/{id}/messages   play one turn
    POST /api/sessions/{id}/abandon    stop playing
    GET  /api/sessions/{id}/feed       unlocked media, newest first
    GET  /assets/{path}                corpus media files
    GET  /healthz                      liveness + corpus identity

Turns are applied under a per-session non-blocking lock: a second message
arriving while one is being played gets 409 rather than queueing, because a
second in-flight turn could only ever be answered out of order.
"""

from __future__ import annotations

import logging
import os
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel, Field

from .clocks import Clock, SystemClock, format_instant
from .corpus import NarrativeCorpus, load_corpus
from .engine import (
    ACTIVE,
    POLICIES,
    POLICY_JUDGE,
    POLICY_LEXICAL,
    GameSession,
    TurnOutcome,
    abandon,
    media_feed,
    new_session,
    submit_message,
)
from .errors import (
    CorpusMismatch,
    EmptyMessageError,
    GatewayError,
    SessionNotActiveError,
    SessionNotFound,
)
from .gateway import CannedGateway, Gateway, GatewayConfig, HttpGateway
from .moderation import BlocklistModerator, Moderator
from .store import SessionStore

logger = logging.getLogger("chatquest.service")

MAX_MESSAGE_CHARS = 4000


class ServiceConfig(BaseModel):
    corpus_path: str = "corpora/eternagram-sample/corpus.json"
    data_dir: str = "data"
    judge_policy: str = POLICY_LEXICAL
    port: int = 8000
    ui_origin: str = "*"
    frontend_dir: str = ""

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "ServiceConfig":
        env = os.environ if env is None else env
        # With a live model configured the judge stage defaults on; without
        # one it defaults off so the service is playable out of the box.
        default_policy = POLICY_JUDGE if env.get("LLM_ENDPOINT") else POLICY_LEXICAL
        policy = env.get("JUDGE_POLICY", default_policy)
        if policy not in POLICIES:
            raise ValueError(f"JUDGE_POLICY must be one of {POLICIES}, got {policy!r}")
        return cls(
            corpus_path=env.get("CORPUS_PATH", cls.model_fields["corpus_path"].default),
            data_dir=env.get("DATA_DIR", cls.model_fields["data_dir"].default),
            judge_policy=policy,
            port=int(env.get("PORT", "8000")),
            ui_origin=env.get("UI_ORIGIN", "*"),
            frontend_dir=env.get("FRONTEND_DIR", ""),
        )


# --- wire models -----------------------------------------------------------


class CreateSessionRequest(BaseModel):
    corpus_hash: str | None = None


class MessageRequest(BaseModel):
    message: str = Field(min_length=1, max_length=MAX_MESSAGE_CHARS)


class TurnView(BaseModel):
    kind: str
    text: str
    timestamp: str
    level: int
    fired_trigger_ids: list[str] = []
    media_ids: list[str] = []


class SessionView(BaseModel):
    session_id: str
    corpus_hash: str
    character_name: str
    status: str
    current_level: int
    final_level: int
    goal_text: str
    fired: list[str]
    history: list[TurnView]
    created_at: str
    updated_at: str


class MediaView(BaseModel):
    media_id: str
    caption: str
    asset_url: str
    unlocked_at: str


class FiredView(BaseModel):
    trigger_id: str
    reveal_text: str


class TransitionView(BaseModel):
    cutscene_text: str
    next_goal_text: str
    new_level: int
    completed: bool
    media: list[MediaView]


class MessageResponse(BaseModel):
    session: SessionView
    reply: str
    blocked: bool
    fired: list[FiredView]
    transition: TransitionView | None
    unlocked: list[MediaView]


class FeedResponse(BaseModel):
    items: list[MediaView]


class HealthResponse(BaseModel):
    status: str
    corpus_id: str
    corpus_hash: str


# --- view builders ------------------------------------------------------------


def session_view(corpus: NarrativeCorpus, session: GameSession) -> SessionView:
    goal = corpus.levels[session.current_level].goal_text if session.status == ACTIVE else ""
    return SessionView(
        session_id=session.session_id,
        corpus_hash=session.corpus_hash,
        character_name=corpus.persona.character_name,
        status=session.status,
        current_level=session.current_level,
        final_level=corpus.final_level,
        goal_text=goal,
        fired=list(session.fired),
        history=[TurnView(
            kind=t.kind, text=t.text, timestamp=format_instant(t.timestamp),
            level=t.level, fired_trigger_ids=list(t.fired_trigger_ids),
            media_ids=list(t.media_ids),
        ) for t in session.history],
        created_at=format_instant(session.created_at),
        updated_at=format_instant(session.updated_at),
    )


def media_view(corpus: NarrativeCorpus, media_id: str, unlocked_at: str) -> MediaView:
    post = corpus.media_by_id(media_id)
    return MediaView(media_id=post.media_id, caption=post.caption,
                     asset_url=f"/assets/{post.asset_path}", unlocked_at=unlocked_at)


def feed_response(corpus: NarrativeCorpus, session: GameSession) -> FeedResponse:
    return FeedResponse(items=[
        media_view(corpus, item.media_id, format_instant(item.unlocked_at))
        for item in media_feed(corpus, session)
    ])


# --- app factory -----------------------------------------------------------------


def build_gateway(env: dict[str, str] | None = None) -> Gateway:
    """Live HTTP gateway when an endpoint is configured, canned otherwise."""
    config = GatewayConfig.from_env(env)
    if config.endpoint:
        return HttpGateway(config)
    logger.info("no LLM_ENDPOINT configured; using the canned offline gateway")
    return CannedGateway()


def create_app(
    config: ServiceConfig | None = None,
    *,
    gateway: Gateway | None = None,
    clock: Clock | None = None,
    moderator: Moderator | None = None,
) -> FastAPI:
    config = config or ServiceConfig.from_env()
    corpus = load_corpus(config.corpus_path)
    store = SessionStore(config.data_dir)
    gateway = gateway if gateway is not None else build_gateway()
    clock = clock if clock is not None else SystemClock()
    moderator = moderator if moderator is not None else BlocklistModerator()

    app = FastAPI(title="chatquest", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[config.ui_origin] if config.ui_origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    turn_locks: dict[str, threading.Lock] = {}
    turn_locks_guard = threading.Lock()

    def turn_lock(session_id: str) -> threading.Lock:
        with turn_locks_guard:
            return turn_locks.setdefault(session_id, threading.Lock())

    def fetch(session_id: str) -> GameSession:
        try:
            return store.get(session_id)
        except SessionNotFound:
            raise HTTPException(status_code=404, detail="session not found")

    @app.post("/api/sessions", response_model=SessionView, status_code=201)
    def create_session(request: CreateSessionRequest | None = None) -> SessionView:
        wanted = request.corpus_hash if request else None
        if wanted and wanted != corpus.content_hash:
            raise HTTPException(
                status_code=409,
                detail=f"this server runs corpus {corpus.content_hash}, not {wanted}")
        session = new_session(corpus, clock)
        store.save(session)
        return session_view(corpus, session)

    @app.get("/api/sessions/{session_id}", response_model=SessionView)
    def get_session(session_id: str) -> SessionView:
        return session_view(corpus, fetch(session_id))

    @app.post("/api/sessions/{session_id}/messages", response_model=MessageResponse)
    def post_message(session_id: str, request: MessageRequest) -> MessageResponse:
        session = fetch(session_id)
        lock = turn_lock(session_id)
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409,
                                detail="a turn is already being played")
        try:
            outcome = submit_message(
                corpus, session, request.message, gateway,
                policy=config.judge_policy, clock=clock, moderator=moderator)
            store.save(session)
        except EmptyMessageError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except (SessionNotActiveError, CorpusMismatch) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except GatewayError as exc:
            logger.warning("gateway failure in session %s: %s", session_id, exc)
            raise HTTPException(status_code=503,
                                detail="the character is unreachable; try again")
        finally:
            lock.release()
        return message_response(session, outcome)

    def message_response(session: GameSession, outcome: TurnOutcome) -> MessageResponse:
        feed = {item.media_id: format_instant(item.unlocked_at)
                for item in media_feed(corpus, session)}
        trigger_media = [
            media_view(corpus, post.media_id, feed[post.media_id])
            for tid in outcome.newly_fired
            for post in corpus.media if post.unlock == tid
        ]
        transition = None
        if outcome.transition is not None:
            t = outcome.transition
            transition = TransitionView(
                cutscene_text=t.cutscene_text, next_goal_text=t.next_goal_text,
                new_level=t.new_level, completed=t.completed,
                media=[media_view(corpus, mid, feed[mid]) for mid in t.media_ids])
        return MessageResponse(
            session=session_view(corpus, session),
            reply=outcome.reply,
            blocked=outcome.blocked,
            fired=[FiredView(trigger_id=tid,
                             reveal_text=corpus.triggers[tid].reveal_text)
                   for tid in outcome.newly_fired],
            transition=transition,
            unlocked=trigger_media + (list(transition.media) if transition else []),
        )

    @app.post("/api/sessions/{session_id}/abandon", response_model=SessionView)
    def abandon_session(session_id: str) -> SessionView:
        session = fetch(session_id)
        try:
            abandon(session, clock)
        except SessionNotActiveError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        store.save(session)
        return session_view(corpus, session)

    @app.get("/api/sessions/{session_id}/feed", response_model=FeedResponse)
    def get_feed(session_id: str) -> FeedResponse:
        return feed_response(corpus, fetch(session_id))

    @app.get("/assets/{asset_path:path}")
    def get_asset(asset_path: str) -> FileResponse:
        if corpus.base_dir is None:
            raise HTTPException(status_code=404, detail="no assets available")
        base = corpus.base_dir.resolve()
        target = (base / asset_path).resolve()
        if not target.is_relative_to(base) or not target.is_file():
            raise HTTPException(status_code=404, detail="asset not found")
        return FileResponse(target)

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(status="ok", corpus_id=corpus.corpus_id,
                              corpus_hash=corpus.content_hash)

    if config.frontend_dir and Path(config.frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=config.frontend_dir, html=True),
                  name="frontend")

    return app


def main() -> None:
    """Entry point for `chatquest serve` and `python -m chatquest.service`."""
    import uvicorn

    logging.basicConfig(level=logging.INFO)
    config = ServiceConfig.from_env()
    app = create_app(config)
    uvicorn.run(app, host="0.0.0.0", port=config.port)


if __name__ == "__main__":
    main()
