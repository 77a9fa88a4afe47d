"""Language-model gateways: live HTTP, scripted, and canned.

All three speak the same tiny interface: `complete(messages)` returns the
character's next line, `judge(rubric, utterance, context)` returns the raw
text of a referee verdict (the engine parses it with parse_verdict, failing
closed on garbage). Messages are chat-completion dicts: {"role", "content"}.
"""

from __future__ import annotations

import itertools
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

from .errors import GatewayExhausted, GatewayRejected, GatewayTimeout, JudgeUnparseable, ScriptError
from .textnorm import rubric_digest

Message = dict[str, str]

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})
BACKOFF_BASE_S = 0.5
DEFAULT_MAX_ATTEMPTS = 4


class Gateway(Protocol):
    def complete(self, messages: list[Message]) -> str: ...

    def judge(self, rubric: str, utterance: str, context: list[Message]) -> str: ...


@dataclass
class GatewayConfig:
    endpoint: str
    model: str = "gpt-4"
    api_key: str = field(default="", repr=False)  # never logged or serialized
    timeout_s: float = 30.0

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "GatewayConfig":
        env = os.environ if env is None else env
        return cls(
            endpoint=env.get("LLM_ENDPOINT", ""),
            model=env.get("LLM_MODEL", "gpt-4"),
            api_key=env.get("LLM_API_KEY", ""),
            timeout_s=float(env.get("LLM_TIMEOUT_S", "30")),
        )


_VERDICT_RE = re.compile(r"^\s*(yes|no)\b[\s.,:;!?—-]*", re.IGNORECASE)


def parse_verdict(text: str) -> tuple[bool, str]:
    """Split a judge reply into (matched, rationale).

    The reply must lead with YES or NO (any case, punctuation tolerated);
    whatever follows is the rationale. Anything else raises JudgeUnparseable —
    callers decide what failing closed means for them.
    """
    m = _VERDICT_RE.match(text or "")
    if not m:
        head = (text or "").strip()[:80]
        raise JudgeUnparseable(f"judge reply did not lead with YES or NO: {head!r}")
    matched = m.group(1).lower() == "yes"
    rationale = text[m.end():].strip() or text.strip()
    return matched, rationale


def judge_messages(rubric: str, utterance: str, context: list[Message]) -> list[Message]:
    """Build the referee conversation for one trigger decision."""
    lines = [f"{m['role']}: {m['content']}" for m in context]
    transcript = "\n".join(lines) if lines else "(no prior conversation)"
    user = (
        f"Criterion: {rubric}\n\n"
        f"Recent conversation:\n{transcript}\n\n"
        f"Player message: {utterance}\n\n"
        "Does the player message satisfy the criterion?"
    )
    return [
        {"role": "system", "content": (
            "You are a strict referee for a narrative game. Decide whether the "
            "player's message satisfies the criterion. Start your reply with YES "
            "or NO, then give one short sentence of justification.")},
        {"role": "user", "content": user},
    ]


class HttpGateway:
    """Chat-completion client with bounded retries and full-jitter backoff.

    Retries on 429/5xx, timeouts, connection drops, and empty completions;
    any other HTTP status is rejected immediately. Sleep and randomness are
    injectable so tests run instantly and deterministically.
    """

    def __init__(
        self,
        config: GatewayConfig,
        *,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    ):
        if not config.endpoint:
            raise GatewayRejected("no LLM endpoint configured (set LLM_ENDPOINT)")
        self._config = config
        self._client = client if client is not None else httpx.Client(timeout=config.timeout_s)
        self._sleep = sleep
        self._rng = rng if rng is not None else random.Random()
        self._max_attempts = max(1, max_attempts)

    def complete(self, messages: list[Message]) -> str:
        return self._request(messages)

    def judge(self, rubric: str, utterance: str, context: list[Message]) -> str:
        return self._request(judge_messages(rubric, utterance, context))

    def _request(self, messages: list[Message]) -> str:
        payload = {"model": self._config.model, "messages": messages}
        headers = {}
        if self._config.api_key:
            headers["Authorization"] = f"Bearer {self._config.api_key}"

        last_was_timeout = False
        last_detail = "no attempts made"
        for attempt in range(self._max_attempts):
            if attempt:
                # Full jitter: sleep anywhere in [0, base * 2^(attempt-1)).
                self._sleep(self._rng.uniform(0, BACKOFF_BASE_S * 2 ** (attempt - 1)))
            try:
                response = self._client.post(self._config.endpoint,
                                             json=payload, headers=headers)
            except httpx.TimeoutException as exc:
                last_was_timeout, last_detail = True, f"timeout: {exc}"
                continue
            except httpx.TransportError as exc:
                last_was_timeout, last_detail = False, f"connection error: {exc}"
                continue

            if response.status_code in RETRYABLE_STATUS:
                last_was_timeout, last_detail = False, f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise GatewayRejected(f"HTTP {response.status_code}: {response.text[:200]}")

            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                last_was_timeout, last_detail = False, "malformed completion payload"
                continue
            if not isinstance(content, str) or not content.strip():
                last_was_timeout, last_detail = False, "empty completion"
                continue
            return content

        message = f"gave up after {self._max_attempts} attempts; last failure: {last_detail}"
        if last_was_timeout:
            raise GatewayTimeout(message)
        raise GatewayExhausted(message)


@dataclass
class Script:
    """Pre-recorded gateway behaviour for one run.

    replies feed complete() in order; judge_replies maps a rubric digest
    (textnorm.rubric_digest) to the raw verdict texts for successive judge
    calls on that rubric.
    """

    replies: list[str] = field(default_factory=list)
    judge_replies: dict[str, list[str]] = field(default_factory=dict)


class ScriptedGateway:
    """Replays a Script exactly; anything off-script is a hard error.

    Strictness is the point — replay and golden tests must fail loudly the
    moment the engine asks for a completion or verdict the script never
    recorded.
    """

    def __init__(self, script: Script):
        self._replies = list(script.replies)
        self._judge = {k: list(v) for k, v in script.judge_replies.items()}
        self._lock = threading.Lock()
        self.complete_calls: list[list[Message]] = []
        self.judge_calls: list[tuple[str, str]] = []

    def complete(self, messages: list[Message]) -> str:
        with self._lock:
            self.complete_calls.append([dict(m) for m in messages])
            if not self._replies:
                raise ScriptError("scripted reply queue exhausted")
            return self._replies.pop(0)

    def judge(self, rubric: str, utterance: str, context: list[Message]) -> str:
        digest = rubric_digest(rubric)
        with self._lock:
            self.judge_calls.append((digest, utterance))
            queue = self._judge.get(digest)
            if not queue:
                raise ScriptError(f"no scripted verdict left for rubric {digest}")
            return queue.pop(0)


CANNED_REPLIES = (
    "hm. say more about that?",
    "i keep turning that over and nothing surfaces. try another angle?",
    "that feels close to something. keep going.",
    "maybe. my head's all fog past a certain point.",
)


class CannedGateway:
    """Offline stand-in: cycles stock replies, judges everything YES.

    Lets the service and CLI run end-to-end with no model behind them —
    demos, smoke tests, and the UI's integration harness.
    """

    def __init__(self, replies: tuple[str, ...] = CANNED_REPLIES):
        self._cycle = itertools.cycle(replies)
        self._lock = threading.Lock()

    def complete(self, messages: list[Message]) -> str:
        with self._lock:
            return next(self._cycle)

    def judge(self, rubric: str, utterance: str, context: list[Message]) -> str:
        return "YES. (canned affirmative verdict)"
