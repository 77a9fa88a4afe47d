from __future__ import annotations

import io
import json
import subprocess
import sys

from chatquest.cli import main


def run_cli(*argv, stdin_text=""):
    out = io.StringIO()
    code = main(list(argv), stdin=io.StringIO(stdin_text), stdout=out)
    return code, out.getvalue()


# --- lint -----------------------------------------------------------------


def test_lint_clean(sample_corpus_path):
    code, out = run_cli("lint", str(sample_corpus_path))
    assert code == 0
    assert out.startswith("clean: eternagram-sample")


def test_lint_reports_diagnostics(fixtures_dir):
    code, out = run_cli("lint", str(fixtures_dir / "collision.json"))
    assert code == 1
    assert "trigger-collision: t_flood_a/t_flood_b" in out
    assert "1 issue(s)" in out


def test_lint_load_failure(tmp_path, capsys):
    code, _ = run_cli("lint", str(tmp_path / "missing.json"))
    assert code == 2
    assert "error:" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _ = run_cli("lint", str(bad))
    assert code == 2


def test_lint_digests(sample_corpus_path):
    code, out = run_cli("lint", str(sample_corpus_path), "--digests")
    assert code == 0
    lines = out.splitlines()
    digest_lines = [l for l in lines if "  t_" in l]
    assert len(digest_lines) == 6
    for line in digest_lines:
        digest, trigger_id = line.split()
        assert len(digest) == 12
        assert trigger_id.startswith("t_")


# --- replay ----------------------------------------------------------------


def test_replay_matches_golden(sample_corpus_path, fixtures_dir):
    code, out = run_cli("replay", str(sample_corpus_path),
                        str(fixtures_dir / "walkthrough.txt"))
    assert code == 0
    golden = (fixtures_dir / "walkthrough_golden.json").read_text(encoding="utf-8")
    assert out == golden


def test_replay_deterministic_in_process(sample_corpus_path, fixtures_dir):
    args = ("replay", str(sample_corpus_path), str(fixtures_dir / "walkthrough.txt"))
    assert run_cli(*args) == run_cli(*args)


def test_replay_reaches_completed(sample_corpus_path, fixtures_dir):
    _, out = run_cli("replay", str(sample_corpus_path),
                     str(fixtures_dir / "walkthrough.txt"))
    doc = json.loads(out)
    assert doc["status"] == "completed"
    assert doc["session_id"] == "replay"
    assert len(doc["history"]) == 11


def test_replay_lexical_policy(sample_corpus_path, tmp_path):
    transcript = tmp_path / "t.txt"
    transcript.write_text("#reply huh.\nthe climate did this, didn't it\n")
    code, out = run_cli("replay", str(sample_corpus_path), str(transcript),
                        "--policy", "lexical")
    assert code == 0
    doc = json.loads(out)
    assert doc["fired"] == ["t_climate_collapse"]
    assert doc["current_level"] == 1


def test_replay_off_script_fails(sample_corpus_path, tmp_path, capsys):
    transcript = tmp_path / "t.txt"
    # judge policy, lexical candidate, but no #judge directive for it
    transcript.write_text("#reply hm.\nthe climate did this\n")
    code, _ = run_cli("replay", str(sample_corpus_path), str(transcript))
    assert code == 1
    assert "error: turn 1" in capsys.readouterr().err


def test_replay_bad_transcript(sample_corpus_path, tmp_path, capsys):
    transcript = tmp_path / "t.txt"
    transcript.write_text("#judge zzz yes\nhello\n")
    code, _ = run_cli("replay", str(sample_corpus_path), str(transcript))
    assert code == 2
    assert "error" in capsys.readouterr().err

    code, _ = run_cli("replay", str(sample_corpus_path), str(tmp_path / "none.txt"))
    assert code == 2


def test_replay_extra_messages_after_completion(sample_corpus_path, fixtures_dir,
                                                tmp_path, capsys):
    walkthrough = (fixtures_dir / "walkthrough.txt").read_text(encoding="utf-8")
    transcript = tmp_path / "long.txt"
    transcript.write_text(walkthrough + "\nhello? anyone still there?\n")
    code, out = run_cli("replay", str(sample_corpus_path), str(transcript))
    assert code == 0
    assert json.loads(out)["status"] == "completed"
    assert "3 of 4" in capsys.readouterr().err


def test_replay_byte_identical_across_processes(sample_corpus_path, fixtures_dir):
    cmd = [sys.executable, "-m", "chatquest", "replay", str(sample_corpus_path),
           str(fixtures_dir / "walkthrough.txt")]
    first = subprocess.run(cmd, capture_output=True, check=True)
    second = subprocess.run(cmd, capture_output=True, check=True)
    assert first.stdout == second.stdout
    golden = (fixtures_dir / "walkthrough_golden.json").read_bytes()
    assert first.stdout == golden


# --- play -------------------------------------------------------------------


def test_play_lexical_full_run(sample_corpus_path):
    lines = ("the climate collapse did it\n"
             "you live underground and hibernate in pods\n"
             "you're not human — an archive\n")
    code, out = run_cli("play", str(sample_corpus_path), stdin_text=lines)
    assert code == 0
    assert out.startswith("== Ryno ==")
    assert "goal: Help Ryno work out what happened to the world above." in out
    assert "--- cutscene ---" in out
    assert "memory surfaces:" in out
    assert "== completed ==" in out


def test_play_eof_ends_politely(sample_corpus_path):
    code, out = run_cli("play", str(sample_corpus_path), stdin_text="hello there\n")
    assert code == 0
    assert "end of input" in out


def test_play_quit_command(sample_corpus_path):
    code, out = run_cli("play", str(sample_corpus_path), stdin_text="/quit\n")
    assert code == 0
    assert "(abandoned)" in out


def test_play_judge_requires_endpoint(sample_corpus_path, monkeypatch, capsys):
    monkeypatch.delenv("LLM_ENDPOINT", raising=False)
    code, _ = run_cli("play", str(sample_corpus_path), "--policy", "judge")
    assert code == 2
    assert "LLM_ENDPOINT" in capsys.readouterr().err


def test_play_corpus_load_failure(tmp_path):
    code, _ = run_cli("play", str(tmp_path / "no.json"))
    assert code == 2
