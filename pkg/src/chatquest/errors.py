"""Exception types shared across the package.

Corpus loading distinguishes structural problems (ParseError) from broken
invariants (ValidationError); the engine and gateway raise their own families
so callers can map them to exit codes or HTTP statuses without string matching.
"""

from __future__ import annotations


class ChatquestError(Exception):
    """Base class for all package errors."""


# --- corpus ---------------------------------------------------------------

class CorpusError(ChatquestError):
    pass


class ParseError(CorpusError):
    """The corpus document is structurally malformed (bad syntax, wrong
    types, unknown or missing fields). The message carries the field path."""


class ValidationError(CorpusError):
    """The document parsed but violates a corpus invariant. The message names
    the offending identifier or field."""


class OutOfRangeError(CorpusError):
    """A level index outside 0..N-1 was passed to a corpus query."""


# --- engine ---------------------------------------------------------------

class EngineError(ChatquestError):
    pass


class SessionNotActiveError(EngineError):
    """The session is Completed or Abandoned and accepts no further turns."""


class EmptyMessageError(EngineError):
    """The player message is empty after normalization."""


# --- gateway --------------------------------------------------------------

class GatewayError(ChatquestError):
    """Base for LLM gateway failures; a turn that hits one rolls back."""


class GatewayTimeout(GatewayError):
    """Every attempt timed out."""


class GatewayRejected(GatewayError):
    """The endpoint answered with a non-retryable status."""


class GatewayExhausted(GatewayError):
    """Retryable failures persisted through the whole retry budget."""


class JudgeUnparseable(GatewayError):
    """The judge reply had no leading YES/NO verdict. The engine treats this
    as matched=false; it never aborts a turn."""


class ScriptError(GatewayError):
    """A scripted mock ran past its provisioned replies or judge entries."""


# --- transcripts / store ---------------------------------------------------

class TranscriptError(ChatquestError):
    """A replay transcript is malformed or continues past game completion.
    The message names the offending line number."""


class SessionNotFound(ChatquestError, KeyError):
    """No stored session document for this identifier."""


class CorpusMismatch(ChatquestError):
    """A stored session is bound to a corpus hash the service has not loaded
    (mid-game corpus hot-swapping is not supported)."""
