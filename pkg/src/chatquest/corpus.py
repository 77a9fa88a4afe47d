"""The authored narrative corpus: types, loader, validator, and linter.

A corpus is a single JSON document (schema_version 1) describing one game:
the character persona, staged world facts, levels with their triggers and
cutscenes, and media posts unlocked during play. Loaded corpora are immutable
(frozen dataclasses with tuple fields) and safe to share across sessions.

Top-level document fields, all lower_snake_case:

    schema_version   must equal 1
    corpus_id        short identifier
    persona          {character_name, backstory, style_directives, identity_secret}
    prologue         the character's opening message (carries the main goal)
    epilogue         closing narration on completion
    facts            [{fact_id, text, min_level}]
    levels           [{index, goal_text, trigger_ids, cutscene}]
    triggers         [{trigger_id, level, lexical_patterns, judge_rubric,
                       reveal_text, required}]
    media            [{media_id, caption, asset_path, unlock}]
    moderation_fallback   optional replacement line for blocked replies

Unknown fields are a ParseError unless loading leniently. Asset paths resolve
relative to the corpus document's directory.
"""

from __future__ import annotations

import hashlib
import json
import posixpath
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from .errors import OutOfRangeError, ParseError, ValidationError
from .textnorm import group_matches, normalize_text

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Persona:
    """The character the LLM plays, including the withheld final reveal."""

    character_name: str
    backstory: str
    style_directives: tuple[str, ...]
    identity_secret: str


@dataclass(frozen=True)
class WorldFact:
    """One background statement, visible to the prompt from min_level onward."""

    fact_id: str
    text: str
    min_level: int


@dataclass(frozen=True)
class Trigger:
    """A narrative insight the player must articulate.

    lexical_patterns is a list of keyphrase groups: a group matches when every
    keyphrase occurs in the normalized utterance; the trigger prefilter-matches
    when any group matches. The judge rubric then decides semantically.
    """

    trigger_id: str
    level: int
    lexical_patterns: tuple[tuple[str, ...], ...]
    judge_rubric: str
    reveal_text: str
    required: bool


@dataclass(frozen=True)
class Cutscene:
    """Interstitial narration on level completion; introduces the next goal."""

    text: str
    next_goal_text: str
    media_ids: tuple[str, ...]


@dataclass(frozen=True)
class Level:
    index: int
    goal_text: str
    trigger_ids: tuple[str, ...]
    cutscene: Cutscene


@dataclass(frozen=True)
class MediaPost:
    """A feed post unlocked by a trigger firing or a level completing.

    unlock is either a trigger_id (str) or a level index (int).
    """

    media_id: str
    caption: str
    asset_path: str
    unlock: str | int


@dataclass(frozen=True)
class NarrativeCorpus:
    corpus_id: str
    content_hash: str
    persona: Persona
    facts: tuple[WorldFact, ...]
    levels: tuple[Level, ...]
    triggers: dict[str, Trigger]  # insertion order = corpus document order
    media: tuple[MediaPost, ...]
    prologue_text: str
    epilogue_text: str
    moderation_fallback: str = ""
    base_dir: Path | None = field(default=None, compare=False)

    @property
    def final_level(self) -> int:
        return len(self.levels) - 1

    def level_triggers(self, level: int) -> list[Trigger]:
        """Triggers declaring this level, in corpus document order."""
        return [t for t in self.triggers.values() if t.level == level]

    def required_trigger_ids(self, level: int) -> list[str]:
        return [t.trigger_id for t in self.level_triggers(level) if t.required]

    def media_by_id(self, media_id: str) -> MediaPost:
        for post in self.media:
            if post.media_id == media_id:
                return post
        raise KeyError(media_id)


@dataclass(frozen=True)
class Diagnostic:
    """One lint finding. code is one of trigger-collision, unreachable-media,
    fact-shadowing."""

    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.subject}: {self.message}"


# --- parsing ----------------------------------------------------------------

_PERSONA_FIELDS = {"character_name", "backstory", "style_directives", "identity_secret"}
_FACT_FIELDS = {"fact_id", "text", "min_level"}
_TRIGGER_FIELDS = {"trigger_id", "level", "lexical_patterns", "judge_rubric",
                   "reveal_text", "required"}
_LEVEL_FIELDS = {"index", "goal_text", "trigger_ids", "cutscene"}
_CUTSCENE_FIELDS = {"text", "next_goal_text", "media_ids"}
_MEDIA_FIELDS = {"media_id", "caption", "asset_path", "unlock"}
_TOP_FIELDS = {"schema_version", "corpus_id", "persona", "prologue", "epilogue",
               "facts", "levels", "triggers", "media", "moderation_fallback"}


def _require(obj: dict, key: str, kind: type | tuple[type, ...], path: str) -> Any:
    if key not in obj:
        raise ParseError(f"{path}.{key}: missing required field")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        raise ParseError(f"{path}.{key}: expected {_kind_name(kind)}")
    return value


def _kind_name(kind: type | tuple[type, ...]) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def _check_unknown(obj: dict, allowed: set[str], path: str, lenient: bool) -> None:
    if lenient:
        return
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ParseError(f"{path}.{unknown[0]}: unknown field")


def _str_list(value: Any, path: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ParseError(f"{path}: expected a list of strings")
    return tuple(value)


def _parse_persona(obj: Any, lenient: bool) -> Persona:
    if not isinstance(obj, dict):
        raise ParseError("persona: expected an object")
    _check_unknown(obj, _PERSONA_FIELDS, "persona", lenient)
    return Persona(
        character_name=_require(obj, "character_name", str, "persona"),
        backstory=_require(obj, "backstory", str, "persona"),
        style_directives=_str_list(_require(obj, "style_directives", list, "persona"),
                                   "persona.style_directives"),
        identity_secret=_require(obj, "identity_secret", str, "persona"),
    )


def _parse_fact(obj: Any, i: int, lenient: bool) -> WorldFact:
    path = f"facts[{i}]"
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: expected an object")
    _check_unknown(obj, _FACT_FIELDS, path, lenient)
    return WorldFact(
        fact_id=_require(obj, "fact_id", str, path),
        text=_require(obj, "text", str, path),
        min_level=_require(obj, "min_level", int, path),
    )


def _parse_patterns(value: Any, path: str) -> tuple[tuple[str, ...], ...]:
    if not isinstance(value, list):
        raise ParseError(f"{path}: expected a list of keyphrase groups")
    groups = []
    for gi, group in enumerate(value):
        if not isinstance(group, list) or not all(isinstance(k, str) for k in group):
            raise ParseError(f"{path}[{gi}]: expected a list of strings")
        groups.append(tuple(group))
    return tuple(groups)


def _parse_trigger(obj: Any, i: int, lenient: bool) -> Trigger:
    path = f"triggers[{i}]"
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: expected an object")
    _check_unknown(obj, _TRIGGER_FIELDS, path, lenient)
    return Trigger(
        trigger_id=_require(obj, "trigger_id", str, path),
        level=_require(obj, "level", int, path),
        lexical_patterns=_parse_patterns(_require(obj, "lexical_patterns", list, path),
                                         f"{path}.lexical_patterns"),
        judge_rubric=_require(obj, "judge_rubric", str, path),
        reveal_text=_require(obj, "reveal_text", str, path),
        required=_require(obj, "required", bool, path),
    )


def _parse_level(obj: Any, i: int, lenient: bool) -> Level:
    path = f"levels[{i}]"
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: expected an object")
    _check_unknown(obj, _LEVEL_FIELDS, path, lenient)
    cut = _require(obj, "cutscene", dict, path)
    _check_unknown(cut, _CUTSCENE_FIELDS, f"{path}.cutscene", lenient)
    cutscene = Cutscene(
        text=_require(cut, "text", str, f"{path}.cutscene"),
        next_goal_text=_require(cut, "next_goal_text", str, f"{path}.cutscene"),
        media_ids=_str_list(_require(cut, "media_ids", list, f"{path}.cutscene"),
                            f"{path}.cutscene.media_ids"),
    )
    return Level(
        index=_require(obj, "index", int, path),
        goal_text=_require(obj, "goal_text", str, path),
        trigger_ids=_str_list(_require(obj, "trigger_ids", list, path),
                              f"{path}.trigger_ids"),
        cutscene=cutscene,
    )


def _parse_media(obj: Any, i: int, lenient: bool) -> MediaPost:
    path = f"media[{i}]"
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: expected an object")
    _check_unknown(obj, _MEDIA_FIELDS, path, lenient)
    unlock = _require(obj, "unlock", (str, int), path)
    if isinstance(unlock, bool):
        raise ParseError(f"{path}.unlock: expected a trigger_id or level index")
    return MediaPost(
        media_id=_require(obj, "media_id", str, path),
        caption=_require(obj, "caption", str, path),
        asset_path=_require(obj, "asset_path", str, path),
        unlock=unlock,
    )


def parse_corpus(text: str, *, base_dir: Path | None = None,
                 lenient: bool = False) -> NarrativeCorpus:
    """Parse and validate a corpus document from its JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("document: expected a top-level object")
    _check_unknown(doc, _TOP_FIELDS, "document", lenient)

    version = _require(doc, "schema_version", int, "document")
    if version != SCHEMA_VERSION:
        raise ParseError(f"document.schema_version: expected {SCHEMA_VERSION}, got {version}")

    corpus_id = _require(doc, "corpus_id", str, "document")
    persona = _parse_persona(_require(doc, "persona", dict, "document"), lenient)
    prologue = _require(doc, "prologue", str, "document")
    epilogue = _require(doc, "epilogue", str, "document")
    facts = tuple(_parse_fact(o, i, lenient)
                  for i, o in enumerate(_require(doc, "facts", list, "document")))
    levels = tuple(_parse_level(o, i, lenient)
                   for i, o in enumerate(_require(doc, "levels", list, "document")))
    trigger_list = [_parse_trigger(o, i, lenient)
                    for i, o in enumerate(_require(doc, "triggers", list, "document"))]
    media = tuple(_parse_media(o, i, lenient)
                  for i, o in enumerate(_require(doc, "media", list, "document")))
    fallback = doc.get("moderation_fallback", "")
    if not isinstance(fallback, str):
        raise ParseError("document.moderation_fallback: expected string")

    triggers: dict[str, Trigger] = {}
    for t in trigger_list:
        if t.trigger_id in triggers:
            raise ValidationError(f"trigger {t.trigger_id!r}: duplicate trigger_id")
        triggers[t.trigger_id] = t

    corpus = NarrativeCorpus(
        corpus_id=corpus_id,
        content_hash="",
        persona=persona,
        facts=facts,
        levels=levels,
        triggers=triggers,
        media=media,
        prologue_text=prologue,
        epilogue_text=epilogue,
        moderation_fallback=fallback,
        base_dir=base_dir,
    )
    validate_corpus(corpus)
    return replace(corpus, content_hash=content_hash(corpus))


def load_corpus(path: str | Path, *, lenient: bool = False) -> NarrativeCorpus:
    """Load, parse, and fully cross-check a corpus document from disk."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from exc
    return parse_corpus(text, base_dir=path.parent, lenient=lenient)


# --- validation ---------------------------------------------------------------

def validate_corpus(corpus: NarrativeCorpus) -> None:
    """Check every corpus invariant; raise ValidationError naming the offender."""
    if not corpus.persona.character_name.strip():
        raise ValidationError("persona.character_name: must be non-empty")
    if not corpus.persona.identity_secret.strip():
        raise ValidationError("persona.identity_secret: must be non-empty")
    if not corpus.prologue_text.strip():
        raise ValidationError("prologue: must be non-empty")

    n_levels = len(corpus.levels)
    if n_levels < 1:
        raise ValidationError("levels: corpus must define at least one level")
    for i, level in enumerate(corpus.levels):
        if level.index != i:
            raise ValidationError(
                f"levels[{i}].index: expected contiguous index {i}, got {level.index}")

    seen_facts: set[str] = set()
    for fact in corpus.facts:
        if fact.fact_id in seen_facts:
            raise ValidationError(f"fact {fact.fact_id!r}: duplicate fact_id")
        seen_facts.add(fact.fact_id)
        if not (0 <= fact.min_level < n_levels):
            raise ValidationError(
                f"fact {fact.fact_id!r}: min_level {fact.min_level} outside 0..{n_levels - 1}")

    for t in corpus.triggers.values():
        if not (0 <= t.level < n_levels):
            raise ValidationError(
                f"trigger {t.trigger_id!r}: level {t.level} outside 0..{n_levels - 1}")
        if not t.lexical_patterns:
            raise ValidationError(
                f"trigger {t.trigger_id!r}: lexical_patterns must be non-empty")
        for gi, group in enumerate(t.lexical_patterns):
            if not group:
                raise ValidationError(
                    f"trigger {t.trigger_id!r}: lexical_patterns[{gi}] is empty")
            if any(not k.strip() for k in group):
                raise ValidationError(
                    f"trigger {t.trigger_id!r}: lexical_patterns[{gi}] has an empty keyphrase")
        if not t.judge_rubric.strip():
            raise ValidationError(f"trigger {t.trigger_id!r}: judge_rubric must be non-empty")

    for level in corpus.levels:
        declared = {t.trigger_id for t in corpus.triggers.values() if t.level == level.index}
        listed = set(level.trigger_ids)
        for tid in level.trigger_ids:
            if tid not in corpus.triggers:
                raise ValidationError(
                    f"level {level.index}: trigger_ids references unknown trigger {tid!r}")
            if corpus.triggers[tid].level != level.index:
                raise ValidationError(
                    f"level {level.index}: trigger {tid!r} declares level "
                    f"{corpus.triggers[tid].level}")
        if len(listed) != len(level.trigger_ids):
            raise ValidationError(f"level {level.index}: trigger_ids has duplicates")
        if listed != declared:
            missing = sorted(declared - listed)
            raise ValidationError(
                f"level {level.index}: trigger_ids must list every trigger of the level "
                f"(missing {missing[0]!r})")
        if not any(corpus.triggers[tid].required for tid in level.trigger_ids):
            raise ValidationError(f"level {level.index}: needs at least one required trigger")

        cut = level.cutscene
        if not cut.text.strip():
            raise ValidationError(f"level {level.index}: cutscene.text must be non-empty")
        is_final = level.index == n_levels - 1
        if is_final and cut.next_goal_text.strip():
            raise ValidationError(
                f"level {level.index}: final cutscene must have empty next_goal_text")
        if not is_final and not cut.next_goal_text.strip():
            raise ValidationError(
                f"level {level.index}: cutscene.next_goal_text must be non-empty")

    media_ids: set[str] = set()
    for post in corpus.media:
        if post.media_id in media_ids:
            raise ValidationError(f"media {post.media_id!r}: duplicate media_id")
        media_ids.add(post.media_id)
        _check_asset_path(post)
        if isinstance(post.unlock, int):
            if not (0 <= post.unlock < n_levels):
                raise ValidationError(
                    f"media {post.media_id!r}: unlock level {post.unlock} "
                    f"outside 0..{n_levels - 1}")
        elif post.unlock not in corpus.triggers:
            raise ValidationError(
                f"media {post.media_id!r}: unlock references unknown trigger {post.unlock!r}")

    # Cutscene media lists and level unlocks must agree both ways, so every
    # unlock instant is unambiguous.
    for level in corpus.levels:
        for mid in level.cutscene.media_ids:
            if mid not in media_ids:
                raise ValidationError(
                    f"level {level.index}: cutscene references unknown media {mid!r}")
            post = corpus.media_by_id(mid)
            if post.unlock != level.index:
                raise ValidationError(
                    f"level {level.index}: cutscene lists media {mid!r} whose unlock "
                    f"is {post.unlock!r}")
    for post in corpus.media:
        if isinstance(post.unlock, int):
            cut = corpus.levels[post.unlock].cutscene
            if post.media_id not in cut.media_ids:
                raise ValidationError(
                    f"media {post.media_id!r}: unlocked by level {post.unlock} but "
                    f"missing from that cutscene's media_ids")


def _check_asset_path(post: MediaPost) -> None:
    p = post.asset_path
    if not p.strip():
        raise ValidationError(f"media {post.media_id!r}: asset_path must be non-empty")
    if p.startswith("/") or p.startswith("\\") or (len(p) > 1 and p[1] == ":"):
        raise ValidationError(f"media {post.media_id!r}: asset_path must be relative")
    parts = posixpath.normpath(p.replace("\\", "/")).split("/")
    if ".." in parts:
        raise ValidationError(
            f"media {post.media_id!r}: asset_path must not traverse parent directories")


# --- serialization / hashing ---------------------------------------------------

def corpus_to_document(corpus: NarrativeCorpus) -> dict[str, Any]:
    """Rebuild the document structure, preserving authored ordering."""
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "corpus_id": corpus.corpus_id,
        "persona": {
            "character_name": corpus.persona.character_name,
            "backstory": corpus.persona.backstory,
            "style_directives": list(corpus.persona.style_directives),
            "identity_secret": corpus.persona.identity_secret,
        },
        "prologue": corpus.prologue_text,
        "epilogue": corpus.epilogue_text,
        "facts": [
            {"fact_id": f.fact_id, "text": f.text, "min_level": f.min_level}
            for f in corpus.facts
        ],
        "levels": [
            {
                "index": lv.index,
                "goal_text": lv.goal_text,
                "trigger_ids": list(lv.trigger_ids),
                "cutscene": {
                    "text": lv.cutscene.text,
                    "next_goal_text": lv.cutscene.next_goal_text,
                    "media_ids": list(lv.cutscene.media_ids),
                },
            }
            for lv in corpus.levels
        ],
        "triggers": [
            {
                "trigger_id": t.trigger_id,
                "level": t.level,
                "lexical_patterns": [list(g) for g in t.lexical_patterns],
                "judge_rubric": t.judge_rubric,
                "reveal_text": t.reveal_text,
                "required": t.required,
            }
            for t in corpus.triggers.values()
        ],
        "media": [
            {"media_id": m.media_id, "caption": m.caption,
             "asset_path": m.asset_path, "unlock": m.unlock}
            for m in corpus.media
        ],
    }
    if corpus.moderation_fallback:
        doc["moderation_fallback"] = corpus.moderation_fallback
    return doc


def serialize_corpus(corpus: NarrativeCorpus) -> str:
    """Canonical JSON text: sorted keys, authored list order, ASCII-escaped."""
    return json.dumps(corpus_to_document(corpus), sort_keys=True,
                      ensure_ascii=True, separators=(",", ":")) + "\n"


def content_hash(corpus: NarrativeCorpus) -> str:
    """SHA-256 of the canonical serialization; stable across reloads."""
    return hashlib.sha256(serialize_corpus(corpus).encode("utf-8")).hexdigest()


# --- queries / lint -------------------------------------------------------------

def visible_facts(corpus: NarrativeCorpus, level: int) -> list[WorldFact]:
    """Facts with min_level <= level, in corpus order. Pure."""
    if not (0 <= level < len(corpus.levels)):
        raise OutOfRangeError(f"level {level} outside 0..{len(corpus.levels) - 1}")
    return [f for f in corpus.facts if f.min_level <= level]


def lint_corpus(corpus: NarrativeCorpus) -> list[Diagnostic]:
    """Soft checks beyond hard validation. Deterministic; never raises.

    Runs on any NarrativeCorpus, including hand-constructed ones that never
    went through load_corpus, so it re-checks conditions the loader would
    already have rejected (dead facts, dangling unlocks).
    """
    out: list[Diagnostic] = []
    out.extend(_lint_collisions(corpus))
    out.extend(_lint_unreachable_media(corpus))
    out.extend(_lint_fact_shadowing(corpus))
    return out


def _lint_collisions(corpus: NarrativeCorpus) -> Iterable[Diagnostic]:
    triggers = list(corpus.triggers.values())
    for i, a in enumerate(triggers):
        for b in triggers[i + 1:]:
            if a.level != b.level:
                continue
            if _groups_collide(a, b) or _groups_collide(b, a):
                yield Diagnostic(
                    "trigger-collision",
                    f"{a.trigger_id}/{b.trigger_id}",
                    f"one utterance can satisfy both triggers in level {a.level}",
                )


def _groups_collide(a: Trigger, b: Trigger) -> bool:
    # An utterance built from one of b's groups (its keyphrases joined) would
    # also satisfy some group of a.
    for gb in b.lexical_patterns:
        synthetic = normalize_text(" ".join(gb))
        for ga in a.lexical_patterns:
            if group_matches(synthetic, ga):
                return True
    return False


def _lint_unreachable_media(corpus: NarrativeCorpus) -> Iterable[Diagnostic]:
    n_levels = len(corpus.levels)
    for post in corpus.media:
        if isinstance(post.unlock, int):
            if not (0 <= post.unlock < n_levels):
                yield Diagnostic("unreachable-media", post.media_id,
                                 f"unlock level {post.unlock} does not exist")
        elif post.unlock not in corpus.triggers:
            yield Diagnostic("unreachable-media", post.media_id,
                             f"unlock trigger {post.unlock!r} does not exist")
        elif not (0 <= corpus.triggers[post.unlock].level < n_levels):
            yield Diagnostic("unreachable-media", post.media_id,
                             f"unlock trigger {post.unlock!r} sits on a dead level")


def _lint_fact_shadowing(corpus: NarrativeCorpus) -> Iterable[Diagnostic]:
    final = len(corpus.levels) - 1
    for fact in corpus.facts:
        if fact.min_level > final:
            yield Diagnostic("fact-shadowing", fact.fact_id,
                             f"min_level {fact.min_level} exceeds final level {final}")
