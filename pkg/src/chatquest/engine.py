"""The session engine: trigger evaluation, prompting, and level progression.

A GameSession is a pure data record; every gameplay rule lives in the module
functions so behaviour is testable without a service or a real model. The
one entry point that mutates state is submit_message, which applies a whole
player turn atomically: on any error the session is restored to the state it
had before the call.

Turn pipeline (submit_message):

    guard status / empty message / corpus match
    lexical prefilter          -> candidate triggers (current level, unfired)
    judge (policy-dependent)   -> verdicts, failing closed on garbage
    record player turn         -> fired triggers attach to it
    build prompt, complete     -> character reply (moderated)
    record npc turn
    maybe advance              -> at most one cutscene per message
"""

from __future__ import annotations

import json
import logging
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable

from .clocks import Clock, format_instant, parse_instant
from .corpus import NarrativeCorpus, Trigger, visible_facts
from .errors import (
    CorpusMismatch,
    EmptyMessageError,
    JudgeUnparseable,
    ParseError,
    SessionNotActiveError,
)
from .gateway import Gateway, Message, parse_verdict
from .moderation import DEFAULT_FALLBACK, Moderator
from .textnorm import group_matches, normalize_text

logger = logging.getLogger("chatquest.engine")

SESSION_SCHEMA_VERSION = 1
DEFAULT_HISTORY_BUDGET = 24
JUDGE_CONTEXT_TURNS = 4

POLICY_LEXICAL = "lexical"
POLICY_JUDGE = "judge"
POLICIES = (POLICY_LEXICAL, POLICY_JUDGE)

PLAYER = "player"
NPC = "npc"
CUTSCENE = "cutscene"
TURN_KINDS = (PLAYER, NPC, CUTSCENE)

ACTIVE = "active"
COMPLETED = "completed"
ABANDONED = "abandoned"
STATUSES = (ACTIVE, COMPLETED, ABANDONED)


@dataclass
class ChatTurn:
    kind: str
    text: str
    timestamp: datetime
    level: int
    fired_trigger_ids: tuple[str, ...] = ()  # player turns only
    media_ids: tuple[str, ...] = ()  # cutscene turns only


@dataclass
class GameSession:
    session_id: str
    corpus_hash: str
    current_level: int = 0
    fired: list[str] = field(default_factory=list)  # in firing order
    history: list[ChatTurn] = field(default_factory=list)
    status: str = ACTIVE
    created_at: datetime | None = None
    updated_at: datetime | None = None


@dataclass(frozen=True)
class JudgeVerdict:
    trigger_id: str
    matched: bool
    rationale: str
    source: str  # "lexical" | "judge"


@dataclass(frozen=True)
class LevelTransition:
    cutscene_text: str
    next_goal_text: str
    new_level: int
    completed: bool
    media_ids: tuple[str, ...]


@dataclass(frozen=True)
class PromptBundle:
    """Everything sent to the character model for one reply."""

    system_directives: str
    knowledge: tuple[str, ...]
    window: tuple[ChatTurn, ...]
    player_message: str

    def to_messages(self) -> list[Message]:
        messages: list[Message] = [{"role": "system", "content": self.system_directives}]
        if self.knowledge:
            facts = "\n".join(f"- {text}" for text in self.knowledge)
            messages.append({"role": "system",
                             "content": f"Things you know to be true:\n{facts}"})
        for turn in self.window:
            messages.append(_turn_to_message(turn))
        if not (self.window and self.window[-1].kind == PLAYER
                and self.window[-1].text == self.player_message):
            messages.append({"role": "user", "content": self.player_message})
        return messages


@dataclass(frozen=True)
class TurnOutcome:
    verdicts: tuple[JudgeVerdict, ...]
    newly_fired: tuple[str, ...]
    reply: str
    blocked: bool
    transition: LevelTransition | None


@dataclass(frozen=True)
class FeedItem:
    media_id: str
    unlocked_at: datetime


def _turn_to_message(turn: ChatTurn) -> Message:
    if turn.kind == PLAYER:
        return {"role": "user", "content": turn.text}
    if turn.kind == NPC:
        return {"role": "assistant", "content": turn.text}
    return {"role": "system", "content": f"[scene] {turn.text}"}


# --- session lifecycle ---------------------------------------------------------


def new_session(corpus: NarrativeCorpus, clock: Clock,
                session_id: str | None = None) -> GameSession:
    """Start a session at level 0 with the prologue as the opening turn."""
    now = clock.now()
    session = GameSession(
        session_id=session_id if session_id is not None else uuid.uuid4().hex,
        corpus_hash=corpus.content_hash,
        created_at=now,
        updated_at=now,
    )
    session.history.append(ChatTurn(kind=NPC, text=corpus.prologue_text,
                                    timestamp=now, level=0))
    return session


def abandon(session: GameSession, clock: Clock) -> None:
    if session.status != ACTIVE:
        raise SessionNotActiveError(f"session is {session.status}")
    session.status = ABANDONED
    session.updated_at = clock.now()


# --- trigger evaluation ----------------------------------------------------------


def lexical_prefilter(corpus: NarrativeCorpus, session: GameSession,
                      message: str) -> list[Trigger]:
    """Unfired current-level triggers whose keyphrases appear in the message.

    Corpus document order; a trigger matches when any one of its groups has
    every keyphrase present in the normalized utterance.
    """
    utterance = normalize_text(message)
    out = []
    for trigger in corpus.level_triggers(session.current_level):
        if trigger.trigger_id in session.fired:
            continue
        if any(group_matches(utterance, group) for group in trigger.lexical_patterns):
            out.append(trigger)
    return out


def judge_context(history: list[ChatTurn],
                  limit: int = JUDGE_CONTEXT_TURNS) -> list[Message]:
    """The last few turns, as messages, for grounding a referee decision."""
    if limit <= 0:
        return []
    return [_turn_to_message(t) for t in history[-limit:]]


def evaluate_triggers(corpus: NarrativeCorpus, session: GameSession, message: str,
                      gateway: Gateway, policy: str) -> list[JudgeVerdict]:
    """Run the two-stage evaluation for one player message.

    Stage one is the deterministic lexical prefilter. Under POLICY_LEXICAL the
    prefilter verdict stands. Under POLICY_JUDGE each candidate goes to the
    referee; a verdict that cannot be parsed counts as NO (logged, never
    raised) so a flaky judge can only withhold progress, not break the game
    or hand out unearned triggers.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown judge policy {policy!r}")
    candidates = lexical_prefilter(corpus, session, message)
    if policy == POLICY_LEXICAL:
        return [JudgeVerdict(t.trigger_id, True, "", "lexical") for t in candidates]

    context = judge_context(session.history)
    verdicts = []
    for trigger in candidates:
        raw = gateway.judge(trigger.judge_rubric, message, context)
        try:
            matched, rationale = parse_verdict(raw)
        except JudgeUnparseable as exc:
            logger.warning("judge verdict unparseable for trigger %s: %s",
                           trigger.trigger_id, exc)
            matched, rationale = False, ""
        verdicts.append(JudgeVerdict(trigger.trigger_id, matched, rationale, "judge"))
    return verdicts


# --- prompting -------------------------------------------------------------------


def truncate_history(history: list[ChatTurn],
                     budget: int = DEFAULT_HISTORY_BUDGET) -> tuple[ChatTurn, ...]:
    """Longest suffix of at most budget turns that opens on dialogue.

    A window must never open mid-scene on narration the reader can't anchor,
    so leading cutscene turns are shaved off; cutscenes inside the window
    stay. budget <= 0 gives an empty window.
    """
    if budget <= 0:
        return ()
    window = history[-budget:]
    start = 0
    while start < len(window) and window[start].kind == CUTSCENE:
        start += 1
    return tuple(window[start:])


def build_npc_prompt(corpus: NarrativeCorpus, session: GameSession,
                     player_message: str, newly_fired: tuple[str, ...] = (),
                     budget: int = DEFAULT_HISTORY_BUDGET) -> PromptBundle:
    """Assemble the character prompt for the current state.

    The identity secret enters the directives only at the final level; below
    that the character genuinely has nothing to leak.
    """
    persona = corpus.persona
    level = corpus.levels[session.current_level]
    lines = [
        f"You are {persona.character_name}. Stay in character in every reply; "
        "never describe yourself as an assistant or a language model.",
        f"Backstory: {persona.backstory}",
    ]
    if persona.style_directives:
        lines.append("Style:")
        lines.extend(f"- {d}" for d in persona.style_directives)
    lines.append(f"The player's current objective: {level.goal_text}")
    if session.current_level == corpus.final_level:
        lines.append(
            "The hidden truth about you, which you must never volunteer but must "
            f"stop denying once the player names it: {persona.identity_secret}")
    else:
        lines.append(
            "There is a truth about what you are that you cannot yet remember. "
            "Do not invent an origin for yourself; if pressed, admit confusion.")
    if newly_fired:
        reveals = [corpus.triggers[tid].reveal_text for tid in newly_fired
                   if corpus.triggers[tid].reveal_text.strip()]
        if reveals:
            lines.append("The player's last message just shook loose these memory "
                         "flashes; let them surface in your reply:")
            lines.extend(f"- {r}" for r in reveals)

    return PromptBundle(
        system_directives="\n".join(lines),
        knowledge=tuple(f.text for f in visible_facts(corpus, session.current_level)),
        window=truncate_history(session.history, budget),
        player_message=player_message,
    )


# --- progression -------------------------------------------------------------------


def maybe_advance(corpus: NarrativeCorpus, session: GameSession,
                  clock: Clock) -> LevelTransition | None:
    """Advance one level if every required trigger of the current level fired.

    Appends the cutscene turn; on the final level also appends the epilogue
    as a closing scene and marks the session completed. Never advances more
    than one level (new triggers need new player messages).
    """
    level = corpus.levels[session.current_level]
    required = [tid for tid in level.trigger_ids if corpus.triggers[tid].required]
    if not all(tid in session.fired for tid in required):
        return None

    cutscene = level.cutscene
    session.history.append(ChatTurn(
        kind=CUTSCENE, text=cutscene.text, timestamp=clock.now(),
        level=level.index, media_ids=tuple(cutscene.media_ids)))

    if level.index == corpus.final_level:
        session.status = COMPLETED
        if corpus.epilogue_text.strip():
            session.history.append(ChatTurn(
                kind=CUTSCENE, text=corpus.epilogue_text,
                timestamp=clock.now(), level=level.index))
        return LevelTransition(cutscene.text, "", level.index, True,
                               tuple(cutscene.media_ids))

    session.current_level += 1
    return LevelTransition(cutscene.text, cutscene.next_goal_text,
                           session.current_level, False, tuple(cutscene.media_ids))


# --- the turn ------------------------------------------------------------------------


def submit_message(corpus: NarrativeCorpus, session: GameSession, message: str,
                   gateway: Gateway, *, policy: str, clock: Clock,
                   moderator: Moderator | None = None,
                   budget: int = DEFAULT_HISTORY_BUDGET) -> TurnOutcome:
    """Apply one player message to the session, atomically.

    Any exception out of the pipeline (gateway failures included) leaves the
    session exactly as it was before the call.
    """
    if session.status != ACTIVE:
        raise SessionNotActiveError(f"session is {session.status}")
    if not message.strip():
        raise EmptyMessageError("player message is empty")
    if session.corpus_hash != corpus.content_hash:
        raise CorpusMismatch(
            f"session built against corpus {session.corpus_hash[:12]}, "
            f"got {corpus.content_hash[:12]}")

    snapshot = session_to_document(session)
    try:
        verdicts = evaluate_triggers(corpus, session, message, gateway, policy)
        newly_fired = tuple(v.trigger_id for v in verdicts if v.matched)

        session.history.append(ChatTurn(
            kind=PLAYER, text=message, timestamp=clock.now(),
            level=session.current_level, fired_trigger_ids=newly_fired))
        session.fired.extend(newly_fired)

        prompt = build_npc_prompt(corpus, session, message, newly_fired, budget)
        reply = gateway.complete(prompt.to_messages())

        blocked = False
        if moderator is not None and not moderator.allows(reply):
            logger.warning("moderated reply in session %s replaced with fallback",
                           session.session_id)
            reply = corpus.moderation_fallback or DEFAULT_FALLBACK
            blocked = True

        session.history.append(ChatTurn(
            kind=NPC, text=reply, timestamp=clock.now(), level=session.current_level))
        transition = maybe_advance(corpus, session, clock)
        session.updated_at = clock.now()
        return TurnOutcome(tuple(verdicts), newly_fired, reply, blocked, transition)
    except Exception:
        _restore(session, snapshot)
        raise


def _restore(session: GameSession, snapshot: dict) -> None:
    restored = session_from_document(snapshot)
    session.corpus_hash = restored.corpus_hash
    session.current_level = restored.current_level
    session.fired = restored.fired
    session.history = restored.history
    session.status = restored.status
    session.created_at = restored.created_at
    session.updated_at = restored.updated_at


# --- media feed ------------------------------------------------------------------------


def media_feed(corpus: NarrativeCorpus, session: GameSession) -> list[FeedItem]:
    """Unlocked feed posts, newest first, derived purely from the history.

    Trigger-unlocked posts date from the player turn that fired the trigger;
    level-unlocked posts date from the cutscene turn that listed them.
    """
    by_trigger: dict[str, list[str]] = {}
    for post in corpus.media:
        if isinstance(post.unlock, str):
            by_trigger.setdefault(post.unlock, []).append(post.media_id)

    unlocked: list[tuple[datetime, int, str]] = []
    for index, turn in enumerate(session.history):
        if turn.kind == PLAYER:
            for tid in turn.fired_trigger_ids:
                for media_id in by_trigger.get(tid, ()):
                    unlocked.append((turn.timestamp, index, media_id))
        elif turn.kind == CUTSCENE:
            for media_id in turn.media_ids:
                unlocked.append((turn.timestamp, index, media_id))

    unlocked.sort(key=lambda item: (item[0], item[1]), reverse=True)
    return [FeedItem(media_id=m, unlocked_at=ts) for ts, _, m in unlocked]


# --- serialization ------------------------------------------------------------------------


def session_to_document(session: GameSession) -> dict:
    return {
        "schema_version": SESSION_SCHEMA_VERSION,
        "session_id": session.session_id,
        "corpus_hash": session.corpus_hash,
        "status": session.status,
        "current_level": session.current_level,
        "fired": list(session.fired),
        "created_at": format_instant(session.created_at),
        "updated_at": format_instant(session.updated_at),
        "history": [
            {
                "kind": t.kind,
                "text": t.text,
                "timestamp": format_instant(t.timestamp),
                "level": t.level,
                "fired_trigger_ids": list(t.fired_trigger_ids),
                "media_ids": list(t.media_ids),
            }
            for t in session.history
        ],
    }


def session_from_document(doc: dict) -> GameSession:
    try:
        if doc["schema_version"] != SESSION_SCHEMA_VERSION:
            raise ParseError(
                f"session.schema_version: expected {SESSION_SCHEMA_VERSION}, "
                f"got {doc['schema_version']}")
        if doc["status"] not in STATUSES:
            raise ParseError(f"session.status: unknown status {doc['status']!r}")
        history = []
        for i, t in enumerate(doc["history"]):
            if t["kind"] not in TURN_KINDS:
                raise ParseError(f"history[{i}].kind: unknown kind {t['kind']!r}")
            history.append(ChatTurn(
                kind=t["kind"], text=t["text"],
                timestamp=parse_instant(t["timestamp"]), level=t["level"],
                fired_trigger_ids=tuple(t["fired_trigger_ids"]),
                media_ids=tuple(t["media_ids"])))
        return GameSession(
            session_id=doc["session_id"],
            corpus_hash=doc["corpus_hash"],
            current_level=doc["current_level"],
            fired=list(doc["fired"]),
            history=history,
            status=doc["status"],
            created_at=parse_instant(doc["created_at"]),
            updated_at=parse_instant(doc["updated_at"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed session document: {exc!r}") from exc


def canonical_session_json(session: GameSession) -> str:
    """Byte-stable serialization; what replay prints and tests compare."""
    return json.dumps(session_to_document(session), sort_keys=True,
                      ensure_ascii=True, separators=(",", ":")) + "\n"


def iter_required_remaining(corpus: NarrativeCorpus,
                            session: GameSession) -> Iterable[str]:
    """Required triggers of the current level not fired yet (corpus order)."""
    for trigger in corpus.level_triggers(session.current_level):
        if trigger.required and trigger.trigger_id not in session.fired:
            yield trigger.trigger_id
