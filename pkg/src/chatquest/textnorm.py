"""Text normalization shared by the lexical prefilter, lint, and judge digests.

Players type casually, so matching happens on a normal form: Unicode
compatibility decomposition, case folding, and whitespace collapsed to single
spaces. Keyphrases and utterances go through the same pipeline.
"""

from __future__ import annotations

import hashlib
import unicodedata


def normalize_text(text: str) -> str:
    """Return the matching normal form: NFKD, casefolded, whitespace-collapsed."""
    folded = unicodedata.normalize("NFKD", text).casefold()
    return " ".join(folded.split())


def group_matches(utterance_norm: str, group: tuple[str, ...] | list[str]) -> bool:
    """True when every keyphrase of the group occurs in the normalized utterance."""
    return all(normalize_text(phrase) in utterance_norm for phrase in group)


def rubric_digest(rubric: str) -> str:
    """Short stable digest of a judge rubric; keys scripted verdict tables."""
    return hashlib.sha256(normalize_text(rubric).encode("utf-8")).hexdigest()[:12]
