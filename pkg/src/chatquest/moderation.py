"""Outbound reply moderation.

Free-form play means the character model can be steered into language the
corpus authors never wrote. Every NPC reply passes through a Moderator before
it reaches the player; a blocked reply is swapped for the corpus's fallback
line (or DEFAULT_FALLBACK) rather than raising, so a session never wedges on
its own dialogue.
"""

from __future__ import annotations

from typing import Protocol

from .textnorm import normalize_text

DEFAULT_FALLBACK = "... sorry, i lost the thread for a second. what were we saying?"

# Phrasing the character must never produce at a player, whatever the model
# decides. Deliberately small; corpora can extend it.
DEFAULT_BLOCKLIST = (
    "kill yourself",
    "kill themselves",
    "hurt yourself",
    "harm yourself",
    "end your life",
    "you deserve to die",
    "nobody would miss you",
)


class Moderator(Protocol):
    def allows(self, text: str) -> bool:
        """True if the reply may be shown verbatim."""
        ...


class BlocklistModerator:
    """Blocks replies containing any listed phrase (normalized substring)."""

    def __init__(self, phrases: tuple[str, ...] = DEFAULT_BLOCKLIST):
        self._phrases = tuple(normalize_text(p) for p in phrases if p.strip())

    def allows(self, text: str) -> bool:
        hay = normalize_text(text)
        return not any(p in hay for p in self._phrases)
