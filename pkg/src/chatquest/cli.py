"""Command line: play a corpus in the terminal, lint it, replay a transcript.

    chatquest play corpus.json [--policy lexical|judge]
    chatquest lint corpus.json [--digests]
    chatquest replay corpus.json transcript.txt [--policy lexical|judge]
    chatquest serve [--port N]

Exit codes: 0 success / clean, 1 lint diagnostics or a runtime failure,
2 the corpus or transcript could not be loaded at all.

`play` runs entirely in-process: under --policy lexical it needs no model at
all (a canned gateway answers for the character), under --policy judge it
talks to the endpoint in LLM_ENDPOINT. `replay` is deterministic by
construction — scripted gateway, fixed clock, fixed session id — and prints
the final session document as canonical JSON, byte-identical on every run.
"""

from __future__ import annotations

import argparse
import sys
from typing import IO

from .clocks import SystemClock, TickingClock
from .corpus import lint_corpus, load_corpus
from .engine import (
    ACTIVE,
    POLICIES,
    POLICY_JUDGE,
    POLICY_LEXICAL,
    canonical_session_json,
    new_session,
    submit_message,
)
from .errors import ChatquestError, CorpusError, GatewayError, TranscriptError
from .gateway import CannedGateway, GatewayConfig, HttpGateway, ScriptedGateway
from .moderation import BlocklistModerator
from .textnorm import rubric_digest
from .transcript import parse_transcript, script_from_turns

REPLAY_SESSION_ID = "replay"


def main(argv: list[str] | None = None, stdin: IO[str] | None = None,
         stdout: IO[str] | None = None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, stdin, stdout)
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chatquest",
        description="Corpus-driven conversational game: play, lint, replay, serve.")
    sub = parser.add_subparsers(dest="command", required=True)

    play = sub.add_parser("play", help="play a corpus interactively in the terminal")
    play.add_argument("corpus", help="path to a corpus JSON document")
    play.add_argument("--policy", choices=POLICIES, default=POLICY_LEXICAL,
                      help="trigger policy; judge needs LLM_ENDPOINT (default: lexical)")
    play.set_defaults(func=_cmd_play)

    lint = sub.add_parser("lint", help="validate and lint a corpus")
    lint.add_argument("corpus", help="path to a corpus JSON document")
    lint.add_argument("--digests", action="store_true",
                      help="also print each trigger's rubric digest")
    lint.set_defaults(func=_cmd_lint)

    replay = sub.add_parser("replay",
                            help="replay a transcript deterministically and "
                                 "print the final session document")
    replay.add_argument("corpus", help="path to a corpus JSON document")
    replay.add_argument("transcript", help="path to a player transcript")
    replay.add_argument("--policy", choices=POLICIES, default=POLICY_JUDGE,
                        help="trigger policy (default: judge, driven by "
                             "#judge directives)")
    replay.set_defaults(func=_cmd_replay)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--port", type=int, default=None,
                       help="listen port (default: PORT env or 8000)")
    serve.set_defaults(func=_cmd_serve)
    return parser


# --- lint ---------------------------------------------------------------------


def _cmd_lint(args, stdin: IO[str], stdout: IO[str]) -> int:
    corpus = load_corpus(args.corpus)  # CorpusError -> exit 2 via main
    if args.digests:
        for trigger in corpus.triggers.values():
            print(f"{rubric_digest(trigger.judge_rubric)}  {trigger.trigger_id}",
                  file=stdout)
    diagnostics = lint_corpus(corpus)
    for diag in diagnostics:
        print(diag, file=stdout)
    if diagnostics:
        print(f"{len(diagnostics)} issue(s) in {corpus.corpus_id}", file=stdout)
        return 1
    print(f"clean: {corpus.corpus_id} ({corpus.content_hash[:12]})", file=stdout)
    return 0


# --- replay -------------------------------------------------------------------


def _cmd_replay(args, stdin: IO[str], stdout: IO[str]) -> int:
    corpus = load_corpus(args.corpus)
    try:
        with open(args.transcript, encoding="utf-8") as fh:
            turns = parse_transcript(fh.read())
    except OSError as exc:
        print(f"error: {args.transcript}: {exc.strerror or exc}", file=sys.stderr)
        return 2
    except TranscriptError as exc:
        print(f"error: {args.transcript}: {exc}", file=sys.stderr)
        return 2

    gateway = ScriptedGateway(script_from_turns(turns))
    clock = TickingClock()
    session = new_session(corpus, clock, session_id=REPLAY_SESSION_ID)
    played = 0
    try:
        for turn in turns:
            if session.status != ACTIVE:
                break
            submit_message(corpus, session, turn.message, gateway,
                           policy=args.policy, clock=clock)
            played += 1
    except ChatquestError as exc:
        print(f"error: turn {played + 1}: {exc}", file=sys.stderr)
        return 1
    if played < len(turns):
        print(f"note: session ended after {played} of {len(turns)} message(s)",
              file=sys.stderr)
    stdout.write(canonical_session_json(session))
    return 0


# --- play ---------------------------------------------------------------------


def _cmd_play(args, stdin: IO[str], stdout: IO[str]) -> int:
    corpus = load_corpus(args.corpus)
    if args.policy == POLICY_JUDGE:
        config = GatewayConfig.from_env()
        if not config.endpoint:
            print("error: --policy judge needs LLM_ENDPOINT", file=sys.stderr)
            return 2
        gateway = HttpGateway(config)
    else:
        gateway = CannedGateway()

    clock = SystemClock()
    moderator = BlocklistModerator()
    session = new_session(corpus, clock)
    interactive = stdin.isatty()

    print(f"== {corpus.persona.character_name} ==", file=stdout)
    print(f"goal: {corpus.levels[0].goal_text}", file=stdout)
    print(f"{corpus.persona.character_name}: {corpus.prologue_text}", file=stdout)

    while session.status == ACTIVE:
        if interactive:
            stdout.write("you: ")
            stdout.flush()
        line = stdin.readline()
        if not line:
            print("\n(end of input — see you.)", file=stdout)
            return 0
        message = line.strip()
        if not message:
            continue
        if message in ("/quit", "/q"):
            print("(abandoned)", file=stdout)
            return 0
        try:
            outcome = submit_message(corpus, session, message, gateway,
                                     policy=args.policy, clock=clock,
                                     moderator=moderator)
        except GatewayError as exc:
            print(f"(the character is unreachable: {exc})", file=sys.stderr)
            continue
        for tid in outcome.newly_fired:
            reveal = corpus.triggers[tid].reveal_text
            if reveal:
                print(f"  * memory surfaces: {reveal}", file=stdout)
        print(f"{corpus.persona.character_name}: {outcome.reply}", file=stdout)
        if outcome.transition is not None:
            print("\n--- cutscene ---", file=stdout)
            print(outcome.transition.cutscene_text, file=stdout)
            if outcome.transition.completed:
                if corpus.epilogue_text.strip():
                    print(f"\n{corpus.epilogue_text}", file=stdout)
                print("\n== completed ==", file=stdout)
            else:
                print(f"\nnew goal: {outcome.transition.next_goal_text}", file=stdout)
    return 0


# --- serve --------------------------------------------------------------------


def _cmd_serve(args, stdin: IO[str], stdout: IO[str]) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_env()
    if args.port is not None:
        config.port = args.port
    app = create_app(config)
    uvicorn.run(app, host="0.0.0.0", port=config.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
