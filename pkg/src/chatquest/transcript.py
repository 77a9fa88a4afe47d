"""Player transcripts: the text format behind `chatquest replay`.

One player message per line. A message may be preceded by directive lines
that script the machinery for that turn:

    # anything after a lone hash is a comment
    #judge <digest> yes|no     verdict for the trigger rubric with that digest
    #reply <text>              the character's scripted reply to this message

    #judge 3f62a9c01b4d yes
    #reply oh. oh no. you're right about the weather.
    was it climate change that wrecked everything?

Digests come from `chatquest lint --digests`. Directives bind to the next
message line; a directive with no following message is an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import TranscriptError
from .gateway import Script

_DIGEST_LEN = 12
_DIGEST_CHARS = set("0123456789abcdef")


@dataclass
class ScriptedTurn:
    message: str
    judge_verdicts: dict[str, bool] = field(default_factory=dict)
    reply: str | None = None


def parse_transcript(text: str) -> list[ScriptedTurn]:
    turns: list[ScriptedTurn] = []
    pending_judges: dict[str, bool] = {}
    pending_reply: str | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#judge"):
            parts = line.split(None, 2)
            if len(parts) != 3:
                raise TranscriptError(f"line {lineno}: expected '#judge <digest> yes|no'")
            _, digest, word = parts
            if len(digest) != _DIGEST_LEN or not set(digest) <= _DIGEST_CHARS:
                raise TranscriptError(
                    f"line {lineno}: {digest!r} is not a {_DIGEST_LEN}-hex rubric digest")
            word = word.strip().lower()
            if word not in ("yes", "no"):
                raise TranscriptError(f"line {lineno}: verdict must be yes or no, got {word!r}")
            pending_judges[digest] = word == "yes"
        elif line.startswith("#reply"):
            body = line[len("#reply"):].strip()
            if not body:
                raise TranscriptError(f"line {lineno}: #reply needs text")
            pending_reply = body
        elif line.startswith("#"):
            continue  # comment
        else:
            turns.append(ScriptedTurn(message=line,
                                      judge_verdicts=dict(pending_judges),
                                      reply=pending_reply))
            pending_judges.clear()
            pending_reply = None

    if pending_judges or pending_reply is not None:
        raise TranscriptError("trailing directives with no player message after them")
    return turns


def script_from_turns(turns: list[ScriptedTurn]) -> Script:
    """Flatten a transcript into one Script a ScriptedGateway can replay."""
    script = Script()
    for turn in turns:
        if turn.reply is not None:
            script.replies.append(turn.reply)
        for digest, matched in turn.judge_verdicts.items():
            verdict = "YES. (scripted verdict)" if matched else "NO. (scripted verdict)"
            script.judge_replies.setdefault(digest, []).append(verdict)
    return script
